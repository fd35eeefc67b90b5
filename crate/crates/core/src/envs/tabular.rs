use crate::error::{Error, Result};
use crate::theorylab::TabularQ;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest dense table `random_tabular_q` will allocate, in entries.
pub const TABLE_BUDGET: usize = 1 << 22;

/// `count^n`, or `None` on overflow.
pub(crate) fn checked_power(count: usize, n: usize) -> Option<usize> {
    u32::try_from(n).ok().and_then(|e| count.checked_pow(e))
}

/// Random joint value table whose optimal joint action is uniform over
/// `A^n` in every joint state.
///
/// Entries are i.i.d. uniform on `[0, 1)`; one uniformly chosen joint
/// action per joint state is then raised to the row maximum plus one.
pub fn random_tabular_q(n: usize, states: usize, actions: usize, seed: u64) -> Result<TabularQ> {
    if n == 0 || states == 0 || actions == 0 {
        return Err(Error::InvalidArgument("n, S and A must be positive".into()));
    }
    let js = checked_power(states, n);
    let ja = checked_power(actions, n);
    let total = js.zip(ja).and_then(|(a, b)| a.checked_mul(b));
    let (js, ja) = match total {
        Some(t) if t <= TABLE_BUDGET => (js.unwrap(), ja.unwrap()),
        _ => {
            return Err(Error::Budget(format!(
                "table for n={n}, S={states}, A={actions} exceeds {TABLE_BUDGET} entries"
            )))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(js * ja);
    for _ in 0..js {
        let row_start = values.len();
        let mut max = f64::NEG_INFINITY;
        for _ in 0..ja {
            let v: f64 = rng.gen();
            max = max.max(v);
            values.push(v);
        }
        let star = rng.gen_range(0..ja);
        values[row_start + star] = max + 1.0;
    }
    TabularQ::new(n, states, actions, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_table() {
        let q = random_tabular_q(1, 1, 2, 5).unwrap();
        assert_eq!(q.values().len(), 2);
        let v = q.values();
        assert_ne!(v[0], v[1]);
    }

    #[test]
    fn seeded() {
        assert_eq!(
            random_tabular_q(2, 2, 3, 9).unwrap(),
            random_tabular_q(2, 2, 3, 9).unwrap()
        );
    }

    #[test]
    fn budget_is_enforced() {
        assert!(matches!(
            random_tabular_q(8, 2, 8, 0),
            Err(Error::Budget(_))
        ));
        assert!(matches!(
            random_tabular_q(200, 3, 3, 0),
            Err(Error::Budget(_))
        ));
    }
}
