//! Iteration traces: the unit of benchmarking.
//!
//! Row 0 snapshots the starting point; each later row records one completed
//! iteration (stepsize used, success flag, incumbent after the iteration,
//! cumulative evaluation count). Mesh runs add frame-size and direction
//! bracket columns. Floats serialize with 17 significant digits so the CSV
//! round-trips f64 values exactly.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Stepsize floor reached on two consecutive unsuccessful iterations.
    Floor,
    /// Upper-level evaluation budget spent.
    Budget,
    /// Iteration cap.
    IterCap,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Floor => "floor",
            Termination::Budget => "budget",
            Termination::IterCap => "iter_cap",
        }
    }
}

/// Mesh-only per-row diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshRowExtra {
    /// Frame size during the iteration.
    pub delta: f64,
    /// Exact frame size as a "num/den" rational string.
    pub delta_exact: String,
    /// Realized direction-norm brackets: b1 <= ||d|| alpha / Delta <= b2
    /// for every poll direction of the iteration.
    pub b1: f64,
    pub b2: f64,
    /// Cosine-measure estimate of the realized (rounded) direction set.
    pub kappa_realized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    pub upper_evals: u64,
    pub success: bool,
    /// Stepsize used during this iteration (alpha_0 on row 0).
    pub alpha: f64,
    /// Incumbent reduced value after the iteration.
    pub f_tilde: f64,
    /// Incumbent point after the iteration.
    pub x: Vec<f64>,
    pub mesh: Option<MeshRowExtra>,
}

/// Mesh residence audit accumulated during a mesh run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeshAudit {
    pub points_checked: u64,
    pub points_on_mesh: u64,
    /// Largest per-coordinate distance from an integer mesh offset, after
    /// converting the exactly-maintained offsets to floating point.
    pub max_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub problem_id: String,
    pub solver_id: String,
    pub seed: u64,
    pub n_x: usize,
    pub rows: Vec<TraceRow>,
    pub termination: Termination,
    pub upper_evals: u64,
    pub lower_oracle_calls: u64,
    pub lower_inner_iters: u64,
    pub mesh_audit: Option<MeshAudit>,
}

impl Trace {
    pub fn final_row(&self) -> &TraceRow {
        self.rows.last().expect("trace has at least the initial row")
    }

    pub fn final_x(&self) -> &[f64] {
        &self.final_row().x
    }

    pub fn best_f(&self) -> f64 {
        self.rows.iter().map(|r| r.f_tilde).fold(f64::INFINITY, f64::min)
    }

    pub fn success_count(&self) -> u64 {
        self.rows.iter().filter(|r| r.success).count() as u64
    }

    /// Completed iterations (rows excluding the initial snapshot).
    pub fn iterations(&self) -> u64 {
        (self.rows.len() - 1) as u64
    }

    pub fn is_mesh(&self) -> bool {
        self.rows.first().is_some_and(|r| r.mesh.is_some())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("k,upper_evals,success,alpha,F_tilde");
        for i in 1..=self.n_x {
            out.push_str(&format!(",x_{i}"));
        }
        if self.is_mesh() {
            out.push_str(",Delta,Delta_exact,b1,b2,kappa_realized");
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}",
                r.k,
                r.upper_evals,
                u8::from(r.success),
                fmt_f64(r.alpha),
                fmt_f64(r.f_tilde)
            ));
            for v in &r.x {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            if let Some(m) = &r.mesh {
                out.push_str(&format!(
                    ",{},{},{},{},{}",
                    fmt_f64(m.delta),
                    m.delta_exact,
                    fmt_f64(m.b1),
                    fmt_f64(m.b2),
                    fmt_f64(m.kappa_realized)
                ));
            }
            out.push('\n');
        }
        out
    }

    /// Parses a trace CSV produced by `to_csv`. Only the columns needed for
    /// scoring and certification are reconstructed; run identity fields must
    /// come from the caller.
    pub fn parse_csv(text: &str) -> Result<ParsedTrace> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::MalformedTrace("empty file".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let n_x = cols.iter().filter(|c| c.starts_with("x_")).count();
        if n_x == 0 {
            return Err(Error::MalformedTrace("no x columns".into()));
        }
        let has_mesh = cols.contains(&"Delta");
        let mut rows = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let want = 5 + n_x + if has_mesh { 5 } else { 0 };
            if f.len() != want {
                return Err(Error::MalformedTrace(format!(
                    "row {}: expected {} fields, found {}",
                    ln + 2,
                    want,
                    f.len()
                )));
            }
            let parse_u = |s: &str| -> Result<u64> {
                s.parse().map_err(|_| Error::MalformedTrace(format!("bad integer {s:?}")))
            };
            let parse_f = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::MalformedTrace(format!("bad float {s:?}")))
            };
            let x = f[5..5 + n_x].iter().map(|s| parse_f(s)).collect::<Result<Vec<_>>>()?;
            let mesh = if has_mesh {
                Some(MeshRowExtra {
                    delta: parse_f(f[5 + n_x])?,
                    delta_exact: f[6 + n_x].to_string(),
                    b1: parse_f(f[7 + n_x])?,
                    b2: parse_f(f[8 + n_x])?,
                    kappa_realized: parse_f(f[9 + n_x])?,
                })
            } else {
                None
            };
            rows.push(TraceRow {
                k: parse_u(f[0])?,
                upper_evals: parse_u(f[1])?,
                success: f[2] == "1",
                alpha: parse_f(f[3])?,
                f_tilde: parse_f(f[4])?,
                x,
                mesh,
            });
        }
        if rows.is_empty() {
            return Err(Error::MalformedTrace("no data rows".into()));
        }
        Ok(ParsedTrace { n_x, rows })
    }
}

/// Rows reconstructed from a persisted CSV.
#[derive(Debug, Clone)]
pub struct ParsedTrace {
    pub n_x: usize,
    pub rows: Vec<TraceRow>,
}

/// 17 significant digits: enough for exact f64 round-trips.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> Trace {
        Trace {
            problem_id: "p".into(),
            solver_id: "coordinate-ds".into(),
            seed: 7,
            n_x: 2,
            rows: vec![
                TraceRow {
                    k: 0,
                    upper_evals: 1,
                    success: false,
                    alpha: 1.0,
                    f_tilde: 2.0,
                    x: vec![1.0, 1.0],
                    mesh: None,
                },
                TraceRow {
                    k: 1,
                    upper_evals: 4,
                    success: true,
                    alpha: 1.0,
                    f_tilde: 0.5,
                    x: vec![0.0, 0.3333333333333333],
                    mesh: None,
                },
            ],
            termination: Termination::Floor,
            upper_evals: 4,
            lower_oracle_calls: 4,
            lower_inner_iters: 0,
            mesh_audit: None,
        }
    }

    #[test]
    fn csv_round_trips_exactly() {
        let t = sample_trace();
        let parsed = Trace::parse_csv(&t.to_csv()).unwrap();
        assert_eq!(parsed.n_x, 2);
        assert_eq!(parsed.rows.len(), t.rows.len());
        for (a, b) in parsed.rows.iter().zip(&t.rows) {
            assert_eq!(a.f_tilde.to_bits(), b.f_tilde.to_bits());
            assert_eq!(a.alpha.to_bits(), b.alpha.to_bits());
            for (xa, xb) in a.x.iter().zip(&b.x) {
                assert_eq!(xa.to_bits(), xb.to_bits());
            }
            assert_eq!(a.upper_evals, b.upper_evals);
            assert_eq!(a.success, b.success);
        }
    }

    #[test]
    fn fmt_f64_round_trips_awkward_values() {
        for v in [1.0 / 3.0, 1e-300, -0.0, 2.2250738585072014e-308, 0.1 + 0.2] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "value {v} via {s}");
        }
    }

    #[test]
    fn mesh_columns_round_trip() {
        let mut t = sample_trace();
        for r in &mut t.rows {
            r.mesh = Some(MeshRowExtra {
                delta: 0.5,
                delta_exact: "1/2".into(),
                b1: 0.9,
                b2: 1.1,
                kappa_realized: 0.7,
            });
        }
        let parsed = Trace::parse_csv(&t.to_csv()).unwrap();
        let m = parsed.rows[0].mesh.as_ref().unwrap();
        assert_eq!(m.delta_exact, "1/2");
        assert_eq!(m.b1, 0.9);
    }
}
