//! Experiment runner library behind the `bcm` binary: grid specs,
//! execution, plot emission, and the acceptance checks.

pub mod check;
pub mod plots;
pub mod runner;
pub mod spec;

/// Flatten constrained parameters to named scalar columns for CSV output.
pub fn flatten_params(params: &bcm_core::pgabm::ConstrainedParams) -> Vec<(String, f64)> {
    use bcm_core::pgabm::ConstrainedExtra;
    let mut out = vec![
        ("eps_plus".to_string(), params.eps_plus),
        ("eps_minus".to_string(), params.eps_minus),
    ];
    match &params.extra {
        ConstrainedExtra::Bcmb => {}
        ConstrainedExtra::Bcms {
            eps_plus_leader,
            eps_minus_leader,
            leader_probs,
        } => {
            out.push(("eps_plus_leader".into(), *eps_plus_leader));
            out.push(("eps_minus_leader".into(), *eps_minus_leader));
            for (u, p) in leader_probs.iter().enumerate() {
                out.push((format!("leader_prob_{u}"), *p));
            }
        }
        ConstrainedExtra::Bcmi { attention_probs } => {
            for (j, p) in attention_probs.iter().enumerate() {
                out.push((format!("attention_prob_{}", j + 1), *p));
            }
        }
        ConstrainedExtra::Bcmu { backfire_prob } => {
            out.push(("backfire_prob".into(), *backfire_prob));
        }
        ConstrainedExtra::Bcmg { gamma } => {
            out.push(("gamma".into(), *gamma));
        }
    }
    out
}

/// Write posterior samples as long-form CSV (sample_index, param, value).
pub fn write_posterior_csv<W: std::io::Write>(
    mut w: W,
    samples: &bcm_core::svi::PosteriorSamples,
) -> bcm_core::Result<()> {
    writeln!(w, "sample_index,param_name,value")?;
    for (i, s) in samples.samples.iter().enumerate() {
        for (name, value) in flatten_params(s) {
            writeln!(w, "{i},{name},{value}")?;
        }
    }
    Ok(())
}
