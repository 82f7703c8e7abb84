//! Self-contained SVG plots of CSV artifacts — no plotting dependency, so
//! reproducibility artifacts build anywhere.

use crate::error::CliError;

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0; // margins
const MR: f64 = 20.0;
const MT: f64 = 20.0;
const MB: f64 = 50.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_ranges(xs: &[f64], ys: &[f64]) -> Frame {
        let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &x in xs {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
        }
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &y in ys {
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        if x_max == x_min {
            x_max = x_min + 1.0;
        }
        if y_max == y_min {
            y_max = y_min + 1.0;
        }
        let pad = 0.06 * (y_max - y_min);
        Frame { x_min, x_max, y_min: y_min - pad, y_max: y_max + pad }
    }

    fn px(&self, x: f64) -> f64 {
        ML + (x - self.x_min) / (self.x_max - self.x_min) * (W - ML - MR)
    }

    fn py(&self, y: f64) -> f64 {
        H - MB - (y - self.y_min) / (self.y_max - self.y_min) * (H - MT - MB)
    }

    fn polyline(&self, xs: &[f64], ys: &[f64], style: &str) -> String {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        format!("<polyline fill=\"none\" {} points=\"{}\"/>\n", style, pts.join(" "))
    }

    fn axes(&self, x_label: &str, y_label: &str) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
            W - ML - MR,
            H - MT - MB
        ));
        for k in 0..=4 {
            let x = self.x_min + (self.x_max - self.x_min) * k as f64 / 4.0;
            let y = self.y_min + (self.y_max - self.y_min) * k as f64 / 4.0;
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{:.3}</text>\n",
                self.px(x),
                H - MB + 16.0,
                x
            ));
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{:.4}</text>\n",
                ML - 6.0,
                self.py(y) + 4.0,
                y
            ));
        }
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">{x_label}</text>\n",
            ML + (W - ML - MR) / 2.0,
            H - 12.0
        ));
        s.push_str(&format!(
            "<text x=\"16\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{y_label}</text>\n",
            MT + (H - MT - MB) / 2.0,
            MT + (H - MT - MB) / 2.0
        ));
        s
    }
}

fn svg_doc(body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn parse_csv(content: &str, expected_header: &'static str) -> Result<Vec<Vec<f64>>, CliError> {
    let mut lines = content.lines();
    let header = lines.next().unwrap_or("");
    if header != expected_header {
        return Err(CliError::SchemaMismatch {
            expected: expected_header,
            found: header.to_string(),
        });
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match row {
            Ok(r) => rows.push(r),
            Err(_) => {
                return Err(CliError::SchemaMismatch {
                    expected: "numeric rows",
                    found: line.to_string(),
                })
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::SchemaMismatch { expected: "at least one row", found: "empty csv".into() });
    }
    Ok(rows)
}

/// Exponent curve: the sampled polyline, a horizontal zero line, and the
/// finite-difference tangent at 0.
pub fn plot_lambda(csv: &str) -> Result<String, CliError> {
    let rows = parse_csv(csv, "theta,lambda_value")?;
    let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let mut all_y = ys.clone();
    all_y.push(0.0);
    let frame = Frame::from_ranges(&xs, &all_y);
    let mut body = frame.axes("theta", "Lambda(theta)");
    // Zero line.
    body.push_str(&format!(
        "<line x1=\"{ML}\" x2=\"{:.1}\" y1=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999\" stroke-dasharray=\"3 3\"/>\n",
        W - MR,
        frame.py(0.0),
        frame.py(0.0)
    ));
    body.push_str(&frame.polyline(&xs, &ys, "stroke=\"#1f77b4\" stroke-width=\"1.5\""));
    // Tangent at 0 from the grid neighbors of theta = 0.
    if let Some(i0) = xs.iter().position(|&x| x.abs() < 1e-12) {
        if i0 > 0 && i0 + 1 < xs.len() {
            let slope = (ys[i0 + 1] - ys[i0 - 1]) / (xs[i0 + 1] - xs[i0 - 1]);
            let y_at = |x: f64| ys[i0] + slope * (x - xs[i0]);
            let tx = [xs[0], *xs.last().unwrap()];
            let ty = [y_at(tx[0]), y_at(tx[1])];
            body.push_str(&frame.polyline(
                &tx,
                &ty,
                "stroke=\"#d62728\" stroke-width=\"1\" stroke-dasharray=\"6 3\"",
            ));
            body.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"#d62728\">tangent at 0 (slope {slope:.2e})</text>\n",
                ML + 10.0,
                MT + 16.0
            ));
        }
    }
    Ok(svg_doc(&body))
}

/// Rate comparison: empirical `-(1/n) log p` against the Legendre rate.
pub fn plot_ldp(csv: &str) -> Result<String, CliError> {
    let rows = parse_csv(csv, "epsilon,n,p_hat,rate_hat,c_eps,rel_gap,low_stat")?;
    let finite: Vec<&Vec<f64>> = rows.iter().filter(|r| r[3].is_finite()).collect();
    if finite.is_empty() {
        return Err(CliError::SchemaMismatch {
            expected: "at least one finite rate",
            found: "all rows empty-tailed".into(),
        });
    }
    let xs: Vec<f64> = finite.iter().map(|r| r[0]).collect();
    let mut ys: Vec<f64> = finite.iter().map(|r| r[3]).collect();
    ys.extend(finite.iter().map(|r| r[4]));
    let frame = Frame::from_ranges(&xs, &ys);
    let mut body = frame.axes("epsilon", "rate");
    // One polyline per n of the empirical rates, plus the c(eps) reference.
    let mut ns: Vec<f64> = finite.iter().map(|r| r[1]).collect();
    ns.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ns.dedup();
    let colors = ["#1f77b4", "#2ca02c", "#9467bd", "#8c564b"];
    for (k, &n) in ns.iter().enumerate() {
        let pts: Vec<&&Vec<f64>> = finite.iter().filter(|r| r[1] == n).collect();
        let px: Vec<f64> = pts.iter().map(|r| r[0]).collect();
        let py: Vec<f64> = pts.iter().map(|r| r[3]).collect();
        let color = colors[k % colors.len()];
        body.push_str(&frame.polyline(
            &px,
            &py,
            &format!("stroke=\"{color}\" stroke-width=\"1.5\""),
        ));
        for (&x, &y) in px.iter().zip(&py) {
            body.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                frame.px(x),
                frame.py(y)
            ));
        }
        body.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{color}\">n = {n}</text>\n",
            ML + 10.0,
            MT + 16.0 + 16.0 * k as f64
        ));
    }
    let cx: Vec<f64> = finite.iter().map(|r| r[0]).collect();
    let cy: Vec<f64> = finite.iter().map(|r| r[4]).collect();
    body.push_str(&frame.polyline(
        &cx,
        &cy,
        "stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"5 3\"",
    ));
    body.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"#d62728\">c(epsilon)</text>\n",
        ML + 10.0,
        MT + 16.0 + 16.0 * ns.len() as f64
    ));
    Ok(svg_doc(&body))
}

/// Local-CLT overlay: empirical statistic and Gaussian target.
pub fn plot_lclt(csv: &str) -> Result<String, CliError> {
    let rows = parse_csv(csv, "s,statistic,target,abs_err")?;
    let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let stat: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let tgt: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let mut all = stat.clone();
    all.extend(tgt.iter());
    let frame = Frame::from_ranges(&xs, &all);
    let mut body = frame.axes("s", "Sigma sqrt(n) mu(s + S_n in J)");
    body.push_str(&frame.polyline(&xs, &stat, "stroke=\"#1f77b4\" stroke-width=\"1.5\""));
    body.push_str(&frame.polyline(
        &xs,
        &tgt,
        "stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"5 3\"",
    ));
    body.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"#1f77b4\">empirical</text>\n",
        ML + 10.0,
        MT + 16.0
    ));
    body.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"#d62728\">gaussian</text>\n",
        ML + 10.0,
        MT + 32.0
    ));
    Ok(svg_doc(&body))
}

/// Dispatch by kind name.
pub fn plot(kind: &str, csv: &str) -> Result<String, CliError> {
    match kind {
        "lambda" => plot_lambda(csv),
        "ldp" => plot_ldp(csv),
        "lclt" => plot_lclt(csv),
        other => Err(CliError::SchemaMismatch {
            expected: "plot kind lambda|ldp|lclt",
            found: other.to_string(),
        }),
    }
}
