use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{QTable, State};
use crate::domain::Action;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    Greedy,
    EpsilonGreedy(f64),
}

/// Greedy: argmax with lowest-index tie-break. Epsilon-greedy: the greedy
/// action with probability `1 - eps`, otherwise a uniform draw from `rng`.
pub fn select_action<R: Rng + ?Sized>(q: &QTable, state: State, mode: PolicyMode, rng: &mut R) -> Action {
    match mode {
        PolicyMode::Greedy => q.greedy(state),
        PolicyMode::EpsilonGreedy(eps) => {
            if rng.random::<f64>() < eps {
                Action::ALL[rng.random_range(0..Action::COUNT)]
            } else {
                q.greedy(state)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Layout;
    use crate::rl::cell;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_row_greedy_is_first_action() {
        let q = QTable::zeros(Layout::Graph);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = State::from_index(9).unwrap();
        assert_eq!(select_action(&q, s, PolicyMode::Greedy, &mut rng), Action::NoAdaptation);
    }

    #[test]
    fn unique_max_at_six_is_full() {
        let mut q = QTable::zeros(Layout::Graph);
        q.values_mut()[cell(9, 6)] = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = State::from_index(9).unwrap();
        assert_eq!(select_action(&q, s, PolicyMode::Greedy, &mut rng), Action::FullAdaptation);
        assert_eq!(select_action(&q, s, PolicyMode::EpsilonGreedy(0.0), &mut rng), Action::FullAdaptation);
    }

    #[test]
    fn epsilon_one_is_seeded_uniform() {
        let q = QTable::zeros(Layout::Graph);
        let s = State::from_index(0).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200).map(|_| select_action(&q, s, PolicyMode::EpsilonGreedy(1.0), &mut rng)).collect::<Vec<_>>()
        };
        let a = draw(11);
        assert_eq!(a, draw(11));
        for action in Action::ALL {
            assert!(a.contains(&action));
        }
    }
}
