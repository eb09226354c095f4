/// Holm step-down adjustment. Output is in input order.
pub fn holm_adjust(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]).then(i.cmp(&j)));

    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &idx) in order.iter().enumerate() {
        let scaled = (p_values[idx] * (m - rank) as f64).min(1.0);
        running = running.max(scaled);
        adjusted[idx] = running;
    }
    adjusted
}
