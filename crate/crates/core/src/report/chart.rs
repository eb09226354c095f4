//! Grouped bar chart of per-assignment DAMR differences, as plain SVG.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::payload::DeltaPayload;
use crate::dimension::Dimension;

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];
const BAR_W: f64 = 14.0;
const GROUP_GAP: f64 = 28.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 40.0;
/// Pixels from the zero line to the largest bar.
const HALF_HEIGHT: f64 = 140.0;

/// Pixels per percentage point for the given payload.
pub fn scale(payload: &DeltaPayload) -> f64 {
    let max = payload
        .cells
        .iter()
        .filter(|c| !payload.omitted.contains(&c.dimension))
        .map(|c| c.delta.abs())
        .fold(0.0, f64::max);
    if max > 0.0 {
        HALF_HEIGHT / max
    } else {
        1.0
    }
}

fn px(x: f64) -> String {
    format!("{x:.2}")
}

/// Returns `(svg, csv)`. Every bar carries `data-assignment`, `data-dimension`
/// and `data-delta`; the root carries `data-px-per-point`.
pub fn emit_delta_chart(payload: &DeltaPayload) -> (String, String) {
    let dims: Vec<Dimension> = Dimension::ALL
        .into_iter()
        .filter(|d| !payload.omitted.contains(d))
        .collect();
    let assignments: BTreeSet<u32> = payload.cells.iter().map(|c| c.assignment_id).collect();
    let k = scale(payload);
    let group_w = dims.len() as f64 * BAR_W + GROUP_GAP;
    let width = LEFT + assignments.len() as f64 * group_w + 180.0;
    let zero_y = TOP + HALF_HEIGHT;
    let height = TOP + 2.0 * HALF_HEIGHT + 50.0;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" data-px-per-point="{k}" font-family="sans-serif" font-size="11">"#,
        px(width),
        px(height),
        px(width),
        px(height)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="20" font-size="13">DAMR difference, {} minus {} (percentage points)</text>"#,
        px(LEFT),
        payload.tutors.second,
        payload.tutors.first
    )
    .unwrap();

    for (gi, asg) in assignments.iter().enumerate() {
        let x0 = LEFT + gi as f64 * group_w + GROUP_GAP / 2.0;
        for (di, d) in dims.iter().enumerate() {
            let Some(cell) = payload
                .cells
                .iter()
                .find(|c| c.assignment_id == *asg && c.dimension == *d)
            else {
                continue;
            };
            let h = cell.delta.abs() * k;
            let y = if cell.delta >= 0.0 { zero_y - h } else { zero_y };
            writeln!(
                svg,
                r#"<rect class="bar" x="{}" y="{}" width="{}" height="{}" fill="{}" data-assignment="{asg}" data-dimension="{d}" data-delta="{}"/>"#,
                px(x0 + di as f64 * BAR_W),
                px(y),
                px(BAR_W - 2.0),
                px(h),
                PALETTE[d.index()],
                cell.delta
            )
            .unwrap();
        }
        writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">Assignment {asg}</text>"#,
            px(x0 + dims.len() as f64 * BAR_W / 2.0),
            px(height - 20.0)
        )
        .unwrap();
    }

    let plot_right = LEFT + assignments.len() as f64 * group_w;
    writeln!(
        svg,
        r#"<line class="zero" x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="1"/>"#,
        px(LEFT),
        px(zero_y),
        px(plot_right),
        px(zero_y)
    )
    .unwrap();
    for (i, d) in dims.iter().enumerate() {
        let y = TOP + 10.0 + i as f64 * 16.0;
        writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{d}</text>"#,
            px(plot_right + 16.0),
            px(y),
            PALETTE[d.index()],
            px(plot_right + 30.0),
            px(y + 9.0)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");

    let mut csv = String::from("assignment,dimension,first_damr,second_damr,delta,plotted\n");
    for c in &payload.cells {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            c.assignment_id,
            c.dimension,
            c.first_rate,
            c.second_rate,
            c.delta,
            !payload.omitted.contains(&c.dimension)
        )
        .unwrap();
    }
    (svg, csv)
}
