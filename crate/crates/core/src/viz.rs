//! Self-contained SVG charts: per-server load-time scatters with marked
//! anomalies, and horizontal feature-importance bars. No raster, no
//! plotting dependency; coordinates are written with fixed precision so
//! output bytes are reproducible.

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 320.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 44.0;

/// One chart point: x index, y value, anomaly marker.
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub anomaly: bool,
}

/// Scatter in the per-server anomaly layout: x = observation index, y =
/// page load time, regular observations as crosses, anomalies as filled
/// circles with class `anomaly`.
pub fn scatter_svg(title: &str, x_label: &str, y_label: &str, points: &[ScatterPoint]) -> String {
    let x_max = points.iter().map(|p| p.x).fold(1.0f64, f64::max);
    let y_max = points.iter().map(|p| p.y).fold(f64::MIN, f64::max).max(1e-9);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + x / x_max * plot_w;
    let sy = |y: f64| MARGIN_TOP + plot_h - (y / y_max * plot_h);

    let mut svg = String::with_capacity(points.len() * 64 + 1024);
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "  <title>{}</title>\n  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n",
        escape(title)
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    // axes
    svg.push_str(&format!(
        "  <line x1=\"{MARGIN_LEFT}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    ));
    svg.push_str(&format!(
        "  <line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        MARGIN_TOP + plot_h
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "  <text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {:.2})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    ));
    // axis extents
    svg.push_str(&format!(
        "  <text x=\"{MARGIN_LEFT}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">0</text>\n",
        MARGIN_TOP + plot_h + 14.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{:.0}</text>\n",
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h + 14.0,
        x_max
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{MARGIN_TOP}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{:.2}</text>\n",
        MARGIN_LEFT - 4.0,
        y_max
    ));

    for p in points {
        let (x, y) = (sx(p.x), sy(p.y));
        if p.anomaly {
            svg.push_str(&format!(
                "  <circle class=\"anomaly\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2.5\" fill=\"red\"/>\n"
            ));
        } else {
            svg.push_str(&format!(
                "  <path class=\"normal\" d=\"M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}\" stroke=\"steelblue\" stroke-width=\"0.8\"/>\n",
                x - 1.5, y - 1.5, x + 1.5, y + 1.5, x - 1.5, y + 1.5, x + 1.5, y - 1.5
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Horizontal bar chart for feature importances; bars are drawn in the
/// given order (callers pass them sorted descending).
pub fn bar_svg(title: &str, bars: &[(String, f64)]) -> String {
    let bar_h = 18.0;
    let gap = 6.0;
    let label_w = 170.0;
    let value_w = 60.0;
    let plot_w = 520.0;
    let height = MARGIN_TOP + bars.len() as f64 * (bar_h + gap) + 20.0;
    let width = label_w + plot_w + value_w + 20.0;
    let max = bars.iter().map(|(_, v)| *v).fold(1e-12f64, f64::max);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n"
    ));
    svg.push_str(&format!(
        "  <title>{}</title>\n  <rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>\n",
        escape(title)
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        width / 2.0,
        escape(title)
    ));
    for (i, (name, value)) in bars.iter().enumerate() {
        let y = MARGIN_TOP + i as f64 * (bar_h + gap);
        let w = (value / max * plot_w).max(0.0);
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            label_w - 6.0,
            y + bar_h - 5.0,
            escape(name)
        ));
        svg.push_str(&format!(
            "  <rect class=\"bar\" x=\"{label_w:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{bar_h:.2}\" fill=\"steelblue\"/>\n"
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{:.4}</text>\n",
            label_w + w + 6.0,
            y + bar_h - 5.0,
            value
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_marks_anomalies_distinctly() {
        let points = vec![
            ScatterPoint { x: 0.0, y: 0.1, anomaly: false },
            ScatterPoint { x: 1.0, y: 0.2, anomaly: false },
            ScatterPoint { x: 2.0, y: 5.0, anomaly: true },
        ];
        let svg = scatter_svg("Server 3", "Index", "Page Load Time (s)", &points);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("class=\"anomaly\"").count(), 1);
        assert_eq!(svg.matches("class=\"normal\"").count(), 2);
        assert!(svg.contains("Server 3"));
    }

    #[test]
    fn bars_render_in_the_given_order_with_proportional_widths() {
        let bars = vec![
            ("p_obis".to_string(), 0.4033),
            ("p_mail".to_string(), 0.1304),
        ];
        let svg = bar_svg("Feature importance", &bars);
        assert_eq!(svg.matches("class=\"bar\"").count(), 2);
        let first = svg.find("p_obis").unwrap();
        let second = svg.find("p_mail").unwrap();
        assert!(first < second);
        assert!(svg.contains("0.4033"));
    }

    #[test]
    fn output_is_deterministic() {
        let points = vec![ScatterPoint { x: 0.0, y: 0.5, anomaly: false }];
        assert_eq!(
            scatter_svg("t", "x", "y", &points),
            scatter_svg("t", "x", "y", &points)
        );
    }
}
