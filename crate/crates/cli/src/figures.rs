//! Data behind the four figures: lattice images, the critical curve,
//! expected runoff curves and the Example 1 phase diagram.

use runoff_core::analytics;
use runoff_core::general::{example1_phase_grid, PhaseGrid};
use runoff_core::lattice::{bottom_row_stats, encode_pgm, render_grayscale, simulate_lattice};
use runoff_core::{BinaryParams, LatticeParams, Result, RngStream};

use crate::output::csv_num;

pub const FIG1_DELTAS: [f64; 3] = [0.0, 0.1, 0.3];
pub const FIG1_SHAPE: (usize, usize) = (150, 300);
pub const FIG1_RHO: f64 = 0.7;
pub const FIG4_BETAS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
const FIG3_POINTS: usize = 101;
const FIG4_POINTS: usize = 101;

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn csv(name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Artifact {
    let mut text = format!("{header}\n");
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    Artifact {
        name: name.to_string(),
        bytes: text.into_bytes(),
    }
}

pub fn stats_header() -> &'static str {
    "seed,m,n,rho,delta,wet_fraction,mean_bottom,max_runoff"
}

pub fn fig1(seed: u64) -> Result<Vec<Artifact>> {
    let (m, n) = FIG1_SHAPE;
    let mut out = Vec::new();
    let mut rows = Vec::new();
    for delta in FIG1_DELTAS {
        let p = LatticeParams::new(m, n, FIG1_RHO, delta, RngStream::new(seed, 0))?;
        let field = simulate_lattice(&p)?;
        let s = bottom_row_stats(&field);
        rows.push(format!(
            "{seed},{m},{n},{},{},{},{},{}",
            csv_num(FIG1_RHO),
            csv_num(delta),
            csv_num(s.wet_fraction),
            csv_num(s.mean_runoff),
            csv_num(s.max_runoff)
        ));
        out.push(Artifact {
            name: format!("fig1_delta_{delta}.pgm"),
            bytes: encode_pgm(n, m, &render_grayscale(&field)),
        });
    }
    out.push(csv("fig1_stats.csv", stats_header(), rows));
    Ok(out)
}

pub fn fig3() -> Result<Artifact> {
    let rows = (0..FIG3_POINTS)
        .map(|k| {
            let beta = 0.5 * k as f64 / (FIG3_POINTS - 1) as f64;
            analytics::alpha_c(beta).map(|a| format!("{},{}", csv_num(beta), csv_num(a)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(csv("fig3_alpha_c.csv", "beta,alpha_c", rows))
}

/// `E W` against `alpha` for each `beta`, each curve ending at `alpha_c`.
pub fn fig4() -> Result<Artifact> {
    let mut rows = Vec::new();
    for beta in FIG4_BETAS {
        let ac = analytics::alpha_c(beta)?;
        for k in 0..FIG4_POINTS {
            let alpha = if k + 1 == FIG4_POINTS {
                ac
            } else {
                ac * k as f64 / (FIG4_POINTS - 1) as f64
            };
            let ew = analytics::expected_w(&BinaryParams::new(alpha, beta)?)?;
            rows.push(format!("{},{},{}", csv_num(beta), csv_num(alpha), csv_num(ew)));
        }
    }
    Ok(csv("fig4_expected_w.csv", "beta,alpha,expected_w", rows))
}

pub fn phase_rows(grid: &PhaseGrid) -> Vec<String> {
    grid.points
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{}",
                csv_num(p.a),
                csv_num(p.b),
                csv_num(p.hprime1),
                p.regime.as_str()
            )
        })
        .collect()
}

pub fn curve_rows(grid: &PhaseGrid) -> Vec<String> {
    grid.critical_curve
        .iter()
        .map(|&(a, b)| format!("{},{}", csv_num(a), csv_num(b)))
        .collect()
}

pub fn fig6(step: f64) -> Result<Vec<Artifact>> {
    let grid = example1_phase_grid(step)?;
    Ok(vec![
        csv("fig6_phase.csv", "a,b,hprime1,regime", phase_rows(&grid)),
        csv("fig6_critical.csv", "a,b", curve_rows(&grid)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(a: &Artifact) -> Vec<String> {
        String::from_utf8(a.bytes.clone())
            .unwrap()
            .lines()
            .map(String::from)
            .collect()
    }

    #[test]
    fn fig3_endpoints() {
        let l = lines(&fig3().unwrap());
        assert_eq!(l[0], "beta,alpha_c");
        assert_eq!(l[1], "0,0.5");
        assert_eq!(l.last().unwrap(), "0.5,0.25");
    }

    #[test]
    fn fig4_ends_at_critical_point() {
        let l = lines(&fig4().unwrap());
        assert_eq!(l.last().unwrap(), "0.5,0.25,1");
        assert!(l.iter().skip(1).all(|r| !r.ends_with("inf")));
    }

    #[test]
    fn fig6_curve_passes_quarter() {
        let out = fig6(0.05).unwrap();
        let curve = lines(&out[1]);
        assert_eq!(curve[1], "0.25,0");
    }
}
