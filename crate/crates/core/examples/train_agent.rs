//! Log transitions from a simulated analyst, train one layout's Q-table
//! offline and compare it with the model's best action per difficulty.

use neuroloop::orchestrator::{generate_dataset, BehaviorPolicy, SimulatedUser};
use neuroloop::rl::{evaluate, train, RewardWeights, State, TrainingConfig};
use neuroloop::Layout;

fn main() -> anyhow::Result<()> {
    let user = SimulatedUser::default();
    let data = generate_dataset(&user, &BehaviorPolicy::Uniform, 5_000, Layout::Timeline)?;
    let out = train(&data, Layout::Timeline, &TrainingConfig::default())?;
    println!("converged={} after {} sweeps", out.converged, out.sweeps);

    let w = RewardWeights::default();
    for s in State::all() {
        let (best, _) = user.best_actions(s.difficulty, &w);
        let pick = out.table.greedy(s);
        println!("{:<40} greedy {:<20} E[r] {:.3} (best {best:.3})", format!("{s:?}"), pick.to_string(), user.expected_reward(s.difficulty, pick, &w));
    }

    let report = evaluate(&out.table, &data, &w)?;
    println!("behavior {:.3}, greedy IS {:.3}, WIS {:.3}", report.behavior_value, report.greedy_is_value, report.greedy_wis_value);
    Ok(())
}
