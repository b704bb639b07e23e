//! Static SVG emission: boxplots for simulation summaries and forest plots
//! for discovery reports. Hand-rolled shapes, no charting dependency.

/// Five-number summary backing one box.
#[derive(Debug, Clone)]
pub struct BoxStats {
    pub label: String,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub lo: f64,
    pub hi: f64,
}

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 90.0;
const PLOT_HEIGHT: f64 = 360.0;
const BOX_SLOT: f64 = 46.0;

fn axis_ticks(max: f64) -> Vec<f64> {
    let raw = max / 5.0;
    let mag = 10f64.powf(raw.abs().max(1e-12).log10().floor());
    let step = (raw / mag).ceil() * mag;
    let mut ticks = Vec::new();
    let mut t = 0.0;
    while t <= max + 1e-9 {
        ticks.push(t);
        t += step;
        if ticks.len() > 20 {
            break;
        }
    }
    ticks
}

/// Vertical boxplot panel: one box per entry, y from 0 to the data maximum.
pub fn boxplot_svg(title: &str, y_label: &str, boxes: &[BoxStats]) -> String {
    let width = MARGIN_LEFT + BOX_SLOT * boxes.len() as f64 + 30.0;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;
    let max = boxes
        .iter()
        .map(|b| b.hi)
        .fold(0.0_f64, f64::max)
        .max(1e-9);
    let y = |v: f64| MARGIN_TOP + PLOT_HEIGHT * (1.0 - v / max);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n",
        width, height, width, height
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        width / 2.0,
        title
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
        MARGIN_TOP + PLOT_HEIGHT / 2.0,
        MARGIN_TOP + PLOT_HEIGHT / 2.0,
        y_label
    ));
    // axes and ticks
    svg.push_str(&format!(
        "<line x1=\"{l:.1}\" y1=\"{t:.1}\" x2=\"{l:.1}\" y2=\"{b:.1}\" stroke=\"black\"/>\n",
        l = MARGIN_LEFT - 10.0,
        t = MARGIN_TOP,
        b = MARGIN_TOP + PLOT_HEIGHT
    ));
    for tick in axis_ticks(max) {
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            MARGIN_LEFT - 14.0,
            y(tick),
            MARGIN_LEFT - 10.0,
            y(tick)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\">{:.3}</text>\n",
            MARGIN_LEFT - 18.0,
            y(tick) + 3.0,
            tick
        ));
    }

    for (k, b) in boxes.iter().enumerate() {
        let cx = MARGIN_LEFT + BOX_SLOT * (k as f64 + 0.5);
        let half = BOX_SLOT * 0.32;
        // whiskers
        svg.push_str(&format!(
            "<line x1=\"{cx:.1}\" y1=\"{:.1}\" x2=\"{cx:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            y(b.lo),
            y(b.q1)
        ));
        svg.push_str(&format!(
            "<line x1=\"{cx:.1}\" y1=\"{:.1}\" x2=\"{cx:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            y(b.q3),
            y(b.hi)
        ));
        for v in [b.lo, b.hi] {
            svg.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
                cx - half * 0.6,
                y(v),
                cx + half * 0.6,
                y(v)
            ));
        }
        // box and median
        svg.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#9ecae1\" stroke=\"black\"/>\n",
            cx - half,
            y(b.q3),
            2.0 * half,
            (y(b.q1) - y(b.q3)).max(0.5)
        ));
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"2\"/>\n",
            cx - half,
            y(b.median),
            cx + half,
            y(b.median)
        ));
        svg.push_str(&format!(
            "<text x=\"{cx:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\" transform=\"rotate(-55 {cx:.1} {:.1})\">{}</text>\n",
            MARGIN_TOP + PLOT_HEIGHT + 14.0,
            MARGIN_TOP + PLOT_HEIGHT + 14.0,
            b.label
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// One coefficient row of a forest plot.
#[derive(Debug, Clone)]
pub struct ForestRow {
    pub label: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub significant: bool,
}

/// Horizontal forest plot with a vertical reference line at zero.
pub fn forest_svg(title: &str, rows: &[ForestRow]) -> String {
    let row_height = 24.0;
    let label_width = 170.0;
    let plot_width = 420.0;
    let top = 50.0;
    let width = label_width + plot_width + 40.0;
    let height = top + row_height * rows.len() as f64 + 30.0;

    let lo = rows.iter().map(|r| r.lower).fold(0.0_f64, f64::min);
    let hi = rows.iter().map(|r| r.upper).fold(0.0_f64, f64::max);
    let span = (hi - lo).max(1e-9);
    let x = |v: f64| label_width + plot_width * (v - lo) / span;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n",
        width, height, width, height
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        width / 2.0,
        title
    ));
    svg.push_str(&format!(
        "<line x1=\"{zx:.1}\" y1=\"{:.1}\" x2=\"{zx:.1}\" y2=\"{:.1}\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n",
        top - 8.0,
        top + row_height * rows.len() as f64,
        zx = x(0.0)
    ));
    for (k, r) in rows.iter().enumerate() {
        let cy = top + row_height * (k as f64 + 0.5);
        let color = if r.significant { "#d62728" } else { "#555" };
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            label_width - 8.0,
            cy + 3.5,
            r.label
        ));
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{cy:.1}\" x2=\"{:.1}\" y2=\"{cy:.1}\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
            x(r.lower),
            x(r.upper)
        ));
        svg.push_str(&format!(
            "<circle cx=\"{:.1}\" cy=\"{cy:.1}\" r=\"3.4\" fill=\"{color}\"/>\n",
            x(r.estimate)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
