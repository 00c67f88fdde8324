//! Randomized invariants of the simulators and the trajectory format.

use bcm_core::abm::{
    self, graph::Graph, read_trajectory, trajectory_bytes, Dynamics, LatentParams, ModelConfig,
    Trajectory, Variant,
};
use bcm_core::pgabm::{replay_opinions, ReplayHypothesis};
use proptest::prelude::*;

fn arb_variant() -> impl Strategy<Value = Variant> {
    prop_oneof![
        Just(Variant::Bcmb),
        Just(Variant::Bcms),
        Just(Variant::Bcmi),
        Just(Variant::Bcmu),
        Just(Variant::Bcmg),
    ]
}

prop_compose! {
    fn arb_instance()(
        variant in arb_variant(),
        n in 5u32..12,
        t in 1u32..8,
        ips in 1u32..8,
        seed in any::<u64>(),
        eps_plus in 0.0f64..0.5,
        eps_minus in 0.5f64..1.0,
        mu in 0.0f64..0.2,
        extra in 0.0f64..1.0,
        flag in any::<bool>(),
    ) -> (ModelConfig, LatentParams) {
        let mut config = ModelConfig::new(variant, n, t, seed)
            .with_mu(mu, mu)
            .with_interactions_per_step(ips);
        let latents = match variant {
            Variant::Bcmb => LatentParams::bcmb(eps_plus, eps_minus),
            Variant::Bcms => {
                let roles = (0..n).map(|i| i % 3 == 0).collect();
                LatentParams::bcms(
                    (eps_plus, eps_plus * extra, eps_minus, eps_minus + (1.0 - eps_minus) * extra),
                    roles,
                )
            }
            Variant::Bcmi => {
                let f = 2 + (extra * 2.0) as u32; // 2..=4 < n
                config = config.with_feed_len(f);
                LatentParams::bcmi(eps_plus, eps_minus, 1 + ((extra * f as f64) as u32).min(f - 1))
            }
            Variant::Bcmu => LatentParams::bcmu(eps_plus, eps_minus, flag),
            Variant::Bcmg => {
                config = config.with_xi(extra);
                config.graph_density = Some(0.5);
                LatentParams::bcmg(eps_plus, eps_minus, extra)
            }
        };
        (config, latents)
    }
}

fn replay_hypothesis<'a>(latents: &'a LatentParams) -> ReplayHypothesis<'a> {
    match &latents.extra {
        abm::VariantLatents::Bcmb | abm::VariantLatents::Bcmg { .. } => ReplayHypothesis::Plain,
        abm::VariantLatents::Bcms { roles, .. } => ReplayHypothesis::Roles(roles),
        abm::VariantLatents::Bcmi { k_attend } => ReplayHypothesis::Attention(*k_attend),
        abm::VariantLatents::Bcmu { backfire } => ReplayHypothesis::Backfire(*backfire),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn opinions_stay_in_unit_interval_and_outcomes_are_exclusive(
        (config, latents) in arb_instance()
    ) {
        let traj = abm::simulate(&config, &latents).unwrap();
        prop_assert_eq!(traj.events.len(), config.n_events());
        let trace = replay_opinions(&traj, replay_hypothesis(&latents)).unwrap();
        for v in trace.target_after.iter().chain(&trace.x_final) {
            prop_assert!((0.0..=1.0).contains(v));
        }
        for e in &traj.events {
            prop_assert!(!(e.s_plus && e.s_minus));
            if e.s_rewire {
                prop_assert_eq!(e.d, Dynamics::Rewire);
            }
        }
    }

    #[test]
    fn simulation_and_serialization_are_deterministic(
        (config, latents) in arb_instance()
    ) {
        let a = abm::simulate(&config, &latents).unwrap();
        let b = abm::simulate(&config, &latents).unwrap();
        let bytes_a = trajectory_bytes(&a);
        prop_assert_eq!(&bytes_a, &trajectory_bytes(&b));
        let back = read_trajectory(&bytes_a[..]).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(trajectory_bytes(&back), bytes_a);
    }

    #[test]
    fn rewiring_preserves_graph_structure((config, latents) in arb_instance()) {
        prop_assume!(config.variant == Variant::Bcmg);
        let traj = abm::simulate(&config, &latents).unwrap();
        check_graph_invariants(&traj).unwrap();
    }

    #[test]
    fn no_backfire_never_diverges((config, latents) in arb_instance()) {
        prop_assume!(config.variant == Variant::Bcmu);
        let latents = LatentParams::bcmu(latents.eps_plus, latents.eps_minus, false);
        let traj = abm::simulate(&config, &latents).unwrap();
        let mut x = traj.x0.clone();
        for e in &traj.events {
            let (u, v) = e.pair();
            let before = (x[u as usize] - x[v as usize]).abs();
            abm::step_update(
                &mut x,
                &abm::EventInputs::Pair { u, v },
                &latents,
                &config,
            );
            let after = (x[u as usize] - x[v as usize]).abs();
            prop_assert!(after <= before + 1e-15);
        }
    }
}

/// Degree sequence, edge count, and connectivity hold after every event.
fn check_graph_invariants(traj: &Trajectory) -> Result<(), String> {
    let edges = traj.initial_edges.as_ref().ok_or("missing initial edges")?;
    let mut graph = Graph::from_edges(traj.config.n_agents, edges).map_err(|e| e.to_string())?;
    let degrees = graph.degrees();
    let n_edges = graph.n_edges();
    if !graph.is_connected() {
        return Err("initial graph disconnected".into());
    }
    for (i, e) in traj.events.iter().enumerate() {
        if let Some((w, z)) = e.rewire_pair() {
            let (u, v) = e.pair();
            bcm_core::abm::graph::rewire(&mut graph, (u, v), (w, z))
                .map_err(|err| format!("event {i}: {err}"))?;
        }
        if graph.n_edges() != n_edges {
            return Err(format!("event {i}: edge count changed"));
        }
        if graph.degrees() != degrees {
            return Err(format!("event {i}: degree sequence changed"));
        }
        if !graph.is_connected() {
            return Err(format!("event {i}: graph disconnected"));
        }
    }
    Ok(())
}
