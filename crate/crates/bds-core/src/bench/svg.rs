//! Minimal SVG step-function plots for the profile figures.
//!
//! Each figure holds one panel per lower-level accuracy, with one step line
//! per solver. No plotting dependency: the profiles are piecewise-constant,
//! so a path of horizontal and vertical segments is exact.

use super::profiles::ProfileTable;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 280.0;
const MARGIN_L: f64 = 58.0;
const MARGIN_T: f64 = 46.0;
const PANEL_GAP: f64 = 70.0;

struct Axis {
    x0: f64,
    min: f64,
    max: f64,
    log2: bool,
}

impl Axis {
    fn map_x(&self, v: f64) -> f64 {
        let t = if self.log2 {
            (v.max(self.min).log2() - self.min.log2()) / (self.max.log2() - self.min.log2())
        } else {
            (v.clamp(self.min, self.max) - self.min) / (self.max - self.min)
        };
        self.x0 + t * PANEL_W
    }

    fn map_y(&self, frac: f64) -> f64 {
        MARGIN_T + PANEL_H - frac * PANEL_H
    }
}

fn step_path(axis: &Axis, jumps: &[(f64, f64)]) -> String {
    let mut d = format!("M {:.2} {:.2}", axis.x0, axis.map_y(0.0));
    let mut y = 0.0;
    for (x, v) in jumps {
        if *x > axis.max {
            break;
        }
        let px = axis.map_x(*x);
        d.push_str(&format!(" L {:.2} {:.2}", px, axis.map_y(y)));
        d.push_str(&format!(" L {:.2} {:.2}", px, axis.map_y(*v)));
        y = *v;
    }
    d.push_str(&format!(" L {:.2} {:.2}", axis.x0 + PANEL_W, axis.map_y(y)));
    d
}

fn panel(
    out: &mut String,
    panel_idx: usize,
    title: &str,
    x_label: &str,
    tables: &ProfileTable,
    perf: bool,
) {
    let x0 = MARGIN_L + panel_idx as f64 * (PANEL_W + PANEL_GAP);
    let axis = if perf {
        Axis { x0, min: 1.0, max: 64.0, log2: true }
    } else {
        Axis { x0, min: 0.0, max: 250.0, log2: false }
    };
    let y_bot = MARGIN_T + PANEL_H;
    out.push_str(&format!(
        "<rect x=\"{x0}\" y=\"{MARGIN_T}\" width=\"{PANEL_W}\" height=\"{PANEL_H}\" fill=\"none\" stroke=\"#444\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        x0 + PANEL_W / 2.0,
        MARGIN_T - 14.0,
        title
    ));
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
        x0 + PANEL_W / 2.0,
        y_bot + 34.0,
        x_label
    ));
    // y ticks at 0, 0.5, 1
    for frac in [0.0, 0.5, 1.0] {
        let py = axis.map_y(frac);
        out.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" stroke=\"#bbb\" stroke-dasharray=\"3,3\"/>\n",
            x0,
            x0 + PANEL_W
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\">{frac:.1}</text>\n",
            x0 - 6.0,
            py + 4.0
        ));
    }
    // x ticks
    let ticks: Vec<f64> = if perf {
        vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
    } else {
        vec![0.0, 50.0, 100.0, 150.0, 200.0, 250.0]
    };
    for t in ticks {
        let px = axis.map_x(t);
        out.push_str(&format!(
            "<line x1=\"{px:.1}\" y1=\"{y_bot}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"#444\"/>\n",
            y_bot + 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{t}</text>\n",
            y_bot + 18.0
        ));
    }
    for (s, name) in tables.solvers.iter().enumerate() {
        let f = if perf { tables.rho(s) } else { tables.d(s) };
        let path = step_path(&axis, &f.breakpoints());
        let color = COLORS[s % COLORS.len()];
        out.push_str(&format!(
            "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n"
        ));
        // legend
        let lx = x0 + 10.0;
        let ly = MARGIN_T + 16.0 + 16.0 * s as f64;
        out.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{:.1}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 22.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">{name}</text>\n",
            lx + 28.0,
            ly + 4.0
        ));
    }
}

/// One figure with a panel per (label, table) pair.
pub fn profile_figure(panels: &[(String, &ProfileTable)], perf: bool, caption: &str) -> String {
    let width = MARGIN_L + panels.len() as f64 * (PANEL_W + PANEL_GAP);
    let height = MARGIN_T + PANEL_H + 70.0;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\">\n<rect width=\"100%\" \
         height=\"100%\" fill=\"white\"/>\n"
    );
    let x_label = if perf { "performance ratio" } else { "groups of n_p + 1 evaluations" };
    for (i, (label, table)) in panels.iter().enumerate() {
        panel(&mut out, i, label, x_label, table, perf);
    }
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\">{caption}</text>\n",
        width / 2.0,
        height - 8.0
    ));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_contains_a_path_per_solver_per_panel() {
        let table = ProfileTable::new(
            vec!["coordinate-ds".into(), "mesh-ds".into()],
            vec!["i0".into(), "i1".into()],
            vec![2, 2],
            vec![vec![Some(10), Some(20)], vec![Some(40), None]],
            1e-3,
        );
        let svg = profile_figure(
            &[("lltol 1e-3".into(), &table), ("lltol 1e-6".into(), &table)],
            true,
            "performance profiles",
        );
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<path").count(), 4);
        assert!(svg.contains("coordinate-ds"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
