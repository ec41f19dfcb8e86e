//! Train all three layout agents and run them against the baselines in the
//! simulated closed loop.

use neuroloop::orchestrator::{generate_dataset, simulate, BehaviorPolicy, SimPolicy, SimulatedUser};
use neuroloop::rl::{train, RewardWeights, TrainingConfig};
use neuroloop::Layout;

fn main() -> anyhow::Result<()> {
    let user = SimulatedUser::default();
    let w = RewardWeights::default();
    for layout in Layout::ALL {
        let data = generate_dataset(&user, &BehaviorPolicy::Uniform, 5_000, layout)?;
        let table = train(&data, layout, &TrainingConfig::default())?.table;
        let policies = [SimPolicy::Agent(&table), SimPolicy::AlwaysNoAdaptation, SimPolicy::Random, SimPolicy::Oracle];
        let report = simulate(&user, layout, &policies, 10_000, &w)?;
        println!("{layout}");
        for p in &report.policies {
            println!(
                "  {:<22} optimal {:.3}  accuracy {:.3}  rt {:>6.0} ms  reward {:+.3}",
                p.policy, p.optimal_mwl_rate, p.mean_accuracy, p.mean_reaction_time_ms, p.mean_reward
            );
        }
    }
    Ok(())
}
