//! Minimal static SVG rendering of sweep aggregates. One polyline per noise
//! level, success rate against the oversampling ratio.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = [
    "#1f6fb2", "#d1495b", "#3a7d44", "#8d5a97", "#c77d1e", "#4a4a4a",
];

/// `rows` are verified cell aggregates `(m_over_n, noise, trials,
/// success_rate, median_rel_err)`.
pub fn success_rate_svg(rows: &[(f64, f64, usize, f64, f64)]) -> String {
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let (xmin, xmax) = bounds(&xs);
    let span = if (xmax - xmin).abs() < 1e-12 {
        1.0
    } else {
        xmax - xmin
    };
    let sx = |x: f64| MARGIN + (x - xmin) / span * (WIDTH - 2.0 * MARGIN);
    let sy = |rate: f64| HEIGHT - MARGIN - rate * (HEIGHT - 2.0 * MARGIN);

    // axes
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
    ));
    for tick in [0.0, 0.5, 1.0] {
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"12\" text-anchor=\"end\">{tick}</text>\n",
            x = MARGIN - 6.0,
            y = sy(tick) + 4.0,
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"12\" text-anchor=\"middle\">m / n</text>\n",
        x = WIDTH / 2.0,
        y = HEIGHT - MARGIN / 3.0,
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"12\" text-anchor=\"middle\" \
         transform=\"rotate(-90 {x} {y})\">success rate</text>\n",
        x = MARGIN / 3.0,
        y = HEIGHT / 2.0,
    ));
    svg.push_str(&format!(
        "<text x=\"{xmin_x}\" y=\"{y}\" font-size=\"12\" text-anchor=\"middle\">{xmin}</text>\n\
         <text x=\"{xmax_x}\" y=\"{y}\" font-size=\"12\" text-anchor=\"middle\">{xmax}</text>\n",
        xmin_x = sx(xmin),
        xmax_x = sx(xmax),
        y = HEIGHT - MARGIN + 16.0,
    ));

    // group rows by noise level, keeping first-seen order
    let mut levels: Vec<f64> = Vec::new();
    for row in rows {
        if !levels.iter().any(|&l| l.to_bits() == row.1.to_bits()) {
            levels.push(row.1);
        }
    }
    for (li, level) in levels.iter().enumerate() {
        let color = COLORS[li % COLORS.len()];
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.1.to_bits() == level.to_bits())
            .map(|r| (r.0, r.3))
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let path: Vec<String> = pts
            .iter()
            .map(|(x, rate)| format!("{:.2},{:.2}", sx(*x), sy(*rate)))
            .collect();
        if path.len() > 1 {
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                path.join(" ")
            ));
        }
        for (x, rate) in &pts {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                sx(*x),
                sy(*rate)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"12\" fill=\"{color}\">noise {level}</text>\n",
            x = WIDTH - MARGIN + 4.0,
            y = MARGIN + 14.0 * li as f64,
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(xs: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        min = min.min(x);
        max = max.max(x);
    }
    if !min.is_finite() {
        (0.0, 1.0)
    } else {
        (min, max)
    }
}
