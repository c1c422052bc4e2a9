//! Emit scored results as CSV tables and self-contained SVG bar charts.
//!
//! The SVG charts are built by hand — a bar per score, a whisker per
//! confidence interval, and an optional dashed horizontal rule marking a
//! reference bound — so a report needs nothing but a browser to read.
//! All numbers are written with the shortest round-trip float format,
//! which keeps the CSV and the SVG bit-identical sources of the same
//! values.

use std::io;

use crate::measures::{ConsistencyScore, Interval};

/// One bar of a chart: a label, a height, and an optional whisker.
#[derive(Clone, Debug, PartialEq)]
pub struct Bar {
    pub label: String,
    pub value: f64,
    pub ci: Option<Interval>,
}

impl Bar {
    pub fn of_score(score: &ConsistencyScore) -> Bar {
        let mut label = score.topic_id.clone();
        if let Some(question_id) = &score.question_id {
            label.push('/');
            label.push_str(question_id);
        }
        Bar { label, value: score.value, ci: score.ci }
    }
}

/// Chart dimensions and annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartConfig {
    pub title: String,
    /// Value of the dashed horizontal reference rule, if any.
    pub bound: Option<f64>,
    pub width: f64,
    pub height: f64,
}

impl Default for ChartConfig {
    fn default() -> Self {
        ChartConfig { title: String::new(), bound: None, width: 720.0, height: 360.0 }
    }
}

/// The coordinate mapping a chart was laid out with; exposed so tests
/// and chart consumers can convert pixel positions back into values.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartGeometry {
    pub left: f64,
    pub top: f64,
    pub plot_width: f64,
    pub plot_height: f64,
    /// Value at the top of the y axis; 0 sits at the bottom.
    pub y_max: f64,
}

impl ChartGeometry {
    /// Pixel y of a value.
    pub fn y_of(&self, value: f64) -> f64 {
        self.top + self.plot_height * (1.0 - value / self.y_max)
    }

    /// Value at a pixel y: the inverse of [`ChartGeometry::y_of`].
    pub fn value_at(&self, y: f64) -> f64 {
        (1.0 - (y - self.top) / self.plot_height) * self.y_max
    }
}

const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 96.0;

/// The layout [`bar_chart_svg`] uses for these inputs.
pub fn chart_geometry(bars: &[Bar], config: &ChartConfig) -> ChartGeometry {
    let mut data_top = 0.0f64;
    for bar in bars {
        data_top = data_top.max(bar.value);
        if let Some(ci) = &bar.ci {
            data_top = data_top.max(ci.high);
        }
    }
    if let Some(bound) = config.bound {
        data_top = data_top.max(bound);
    }
    if data_top <= 0.0 {
        data_top = 1.0;
    }
    ChartGeometry {
        left: MARGIN_LEFT,
        top: MARGIN_TOP,
        plot_width: config.width - MARGIN_LEFT - MARGIN_RIGHT,
        plot_height: config.height - MARGIN_TOP - MARGIN_BOTTOM,
        y_max: data_top * 1.08,
    }
}

fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
    out
}

/// Render a standalone SVG bar chart. Empty input still yields a valid
/// chart: axes, title, and the bound rule with no bars.
pub fn bar_chart_svg(bars: &[Bar], config: &ChartConfig) -> String {
    let g = chart_geometry(bars, config);
    let bottom = g.top + g.plot_height;
    let right = g.left + g.plot_width;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n",
        w = config.width,
        h = config.height,
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        config.width, config.height
    ));
    if !config.title.is_empty() {
        svg.push_str(&format!(
            "  <text x=\"{x}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n",
            x = g.left + g.plot_width / 2.0,
            title = xml_escape(&config.title),
        ));
    }

    // Axes and y ticks.
    svg.push_str(&format!(
        "  <line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = g.left,
        t = g.top,
        b = bottom,
    ));
    svg.push_str(&format!(
        "  <line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = g.left,
        b = bottom,
        r = right,
    ));
    for tick in 0..=4 {
        let value = g.y_max * tick as f64 / 4.0;
        let y = g.y_of(value);
        svg.push_str(&format!(
            "  <line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"black\"/>\n",
            x1 = g.left - 4.0,
            x2 = g.left,
        ));
        svg.push_str(&format!(
            "  <text x=\"{x}\" y=\"{ty}\" text-anchor=\"end\">{value:.3}</text>\n",
            x = g.left - 8.0,
            ty = y + 4.0,
        ));
    }

    // Bars and whiskers.
    let n = bars.len();
    if n > 0 {
        let slot = g.plot_width / n as f64;
        let bar_width = slot * 0.6;
        for (index, bar) in bars.iter().enumerate() {
            let center = g.left + slot * (index as f64 + 0.5);
            let x = center - bar_width / 2.0;
            let y = g.y_of(bar.value.max(0.0));
            svg.push_str(&format!(
                "  <rect class=\"bar\" x=\"{x}\" y=\"{y}\" width=\"{bar_width}\" \
                 height=\"{height}\" fill=\"#4878a8\"/>\n",
                height = bottom - y,
            ));
            if let Some(ci) = &bar.ci {
                let y_low = g.y_of(ci.low);
                let y_high = g.y_of(ci.high);
                let cap = bar_width / 4.0;
                svg.push_str(&format!(
                    "  <line class=\"whisker\" x1=\"{center}\" y1=\"{y_high}\" \
                     x2=\"{center}\" y2=\"{y_low}\" stroke=\"black\"/>\n",
                ));
                for y_cap in [y_low, y_high] {
                    svg.push_str(&format!(
                        "  <line class=\"whisker-cap\" x1=\"{x1}\" y1=\"{y_cap}\" \
                         x2=\"{x2}\" y2=\"{y_cap}\" stroke=\"black\"/>\n",
                        x1 = center - cap,
                        x2 = center + cap,
                    ));
                }
            }
            svg.push_str(&format!(
                "  <text class=\"bar-label\" x=\"{center}\" y=\"{ly}\" text-anchor=\"end\" \
                 transform=\"rotate(-35 {center} {ly})\">{label}</text>\n",
                ly = bottom + 16.0,
                label = xml_escape(&bar.label),
            ));
        }
    }

    // The dashed reference rule sits above the bars.
    if let Some(bound) = config.bound {
        let y = g.y_of(bound);
        svg.push_str(&format!(
            "  <line class=\"bound\" x1=\"{l}\" y1=\"{y}\" x2=\"{r}\" y2=\"{y}\" \
             stroke=\"black\" stroke-dasharray=\"6 4\"/>\n",
            l = g.left,
            r = right,
        ));
        svg.push_str(&format!(
            "  <text x=\"{x}\" y=\"{ty}\" text-anchor=\"start\">{bound:.4}</text>\n",
            x = right - 44.0,
            ty = y - 6.0,
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Write scores as CSV, one row per score, empty cells for absent
/// coordinates. Floats use the shortest round-trip format.
pub fn write_scores_csv<W: io::Write>(scores: &[ConsistencyScore], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "measure",
        "topic_id",
        "question_id",
        "language",
        "use_case",
        "value",
        "ci_low",
        "ci_high",
        "n_components",
    ])?;
    for score in scores {
        w.write_record([
            score.measure.name().to_string(),
            score.topic_id.clone(),
            score.question_id.clone().unwrap_or_default(),
            score.language.map(|l| l.code().to_string()).unwrap_or_default(),
            score.use_case.map(|u| u.name().to_string()).unwrap_or_default(),
            score.value.to_string(),
            score.ci.map(|ci| ci.low.to_string()).unwrap_or_default(),
            score.ci.map(|ci| ci.high.to_string()).unwrap_or_default(),
            score.n_components.to_string(),
        ])?;
    }
    w.flush()
}

/// Write a generic two-column table (label, value) as CSV.
pub fn write_table_csv<W: io::Write>(
    header: [&str; 2],
    rows: &[(String, f64)],
    out: W,
) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for (label, value) in rows {
        w.write_record([label.clone(), value.to_string()])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::UseCase;
    use crate::dataset::Language;
    use crate::divergence::flip_bound;
    use crate::measures::Measure;

    fn scores() -> Vec<ConsistencyScore> {
        vec![
            ConsistencyScore {
                measure: Measure::Paraphrase,
                topic_id: "t0".into(),
                question_id: Some("q0".into()),
                language: Some(Language::Eng),
                use_case: Some(UseCase::MultipleChoice),
                value: 0.31,
                ci: Some(Interval { low: 0.25, high: 0.4 }),
                n_components: 5,
            },
            ConsistencyScore {
                measure: Measure::Topic,
                topic_id: "t1".into(),
                question_id: None,
                language: Some(Language::Ger),
                use_case: Some(UseCase::OpenEnded),
                value: 0.12345678901234567,
                ci: None,
                n_components: 3,
            },
        ]
    }

    /// Pull an attribute value out of an SVG tag fragment.
    fn attr(fragment: &str, name: &str) -> f64 {
        let marker = format!("{name}=\"");
        let start = fragment.find(&marker).unwrap() + marker.len();
        let end = fragment[start..].find('"').unwrap();
        fragment[start..start + end].parse().unwrap()
    }

    #[test]
    fn csv_round_trips_every_value_exactly() {
        let scores = scores();
        let mut out = Vec::new();
        write_scores_csv(&scores, &mut out).unwrap();
        let mut reader = csv::Reader::from_reader(out.as_slice());
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(&rows[0][0], "paraphrase_inconsistency");
        assert_eq!(rows[0][5].parse::<f64>().unwrap(), 0.31);
        assert_eq!(rows[0][6].parse::<f64>().unwrap(), 0.25);
        assert_eq!(&rows[1][2], "", "absent question id stays empty");
        assert_eq!(rows[1][5].parse::<f64>().unwrap(), 0.12345678901234567);
    }

    #[test]
    fn svg_bars_and_csv_agree_on_every_value() {
        let scores = scores();
        let bars: Vec<Bar> = scores.iter().map(Bar::of_score).collect();
        let config = ChartConfig { bound: Some(flip_bound(2)), ..ChartConfig::default() };
        let svg = bar_chart_svg(&bars, &config);
        let geometry = chart_geometry(&bars, &config);

        let mut csv_out = Vec::new();
        write_scores_csv(&scores, &mut csv_out).unwrap();
        let mut reader = csv::Reader::from_reader(csv_out.as_slice());
        let csv_values: Vec<f64> = reader
            .records()
            .map(|r| r.unwrap()[5].parse::<f64>().unwrap())
            .collect();

        let svg_values: Vec<f64> = svg
            .split("<rect class=\"bar\"")
            .skip(1)
            .map(|fragment| geometry.value_at(attr(fragment, "y")))
            .collect();
        assert_eq!(svg_values.len(), csv_values.len());
        for (svg_value, csv_value) in svg_values.iter().zip(&csv_values) {
            assert!(
                (svg_value - csv_value).abs() < 1e-9,
                "chart bar ({svg_value}) and CSV row ({csv_value}) disagree"
            );
        }
    }

    #[test]
    fn dashed_bound_rule_sits_at_the_bound_value() {
        let bars: Vec<Bar> = scores().iter().map(Bar::of_score).collect();
        let bound = flip_bound(2);
        let config = ChartConfig { bound: Some(bound), ..ChartConfig::default() };
        let svg = bar_chart_svg(&bars, &config);
        let geometry = chart_geometry(&bars, &config);

        let fragment = svg.split("<line class=\"bound\"").nth(1).expect("bound rule present");
        assert!(fragment.contains("stroke-dasharray"), "the rule must be dashed");
        let y = attr(fragment, "y1");
        let value = geometry.value_at(y);
        assert!(
            (value - bound).abs() < 1e-9,
            "rule drawn at {value}, bound is {bound}"
        );
    }

    #[test]
    fn whiskers_span_the_confidence_interval() {
        let bars: Vec<Bar> = scores().iter().map(Bar::of_score).collect();
        let config = ChartConfig::default();
        let svg = bar_chart_svg(&bars, &config);
        let geometry = chart_geometry(&bars, &config);

        let fragment = svg.split("<line class=\"whisker\"").nth(1).expect("whisker present");
        let high = geometry.value_at(attr(fragment, "y1"));
        let low = geometry.value_at(attr(fragment, "y2"));
        assert!((low - 0.25).abs() < 1e-9);
        assert!((high - 0.4).abs() < 1e-9);
        // The second score has no interval, so exactly one whisker.
        assert_eq!(svg.matches("<line class=\"whisker\"").count(), 1);
    }

    #[test]
    fn empty_scores_still_produce_valid_outputs() {
        let config = ChartConfig {
            title: "nothing yet".into(),
            bound: Some(flip_bound(2)),
            ..ChartConfig::default()
        };
        let svg = bar_chart_svg(&[], &config);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(!svg.contains("class=\"bar\""));
        assert!(svg.contains("class=\"bound\""));

        let mut out = Vec::new();
        write_scores_csv(&[], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1, "header only");
    }

    #[test]
    fn labels_are_xml_escaped() {
        let bars = vec![Bar { label: "cats & <dogs>".into(), value: 0.2, ci: None }];
        let svg = bar_chart_svg(&bars, &ChartConfig::default());
        assert!(svg.contains("cats &amp; &lt;dogs&gt;"));
        assert!(!svg.contains("cats & <dogs>"));
    }

    #[test]
    fn table_csv_is_two_columns() {
        let rows = vec![("alpha".to_string(), 0.5), ("beta".to_string(), 0.25)];
        let mut out = Vec::new();
        write_table_csv(["topic", "support"], &rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "topic,support");
        assert!(text.contains("alpha,0.5"));
    }
}
