/// Result of [`bisect_max_feasible`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BisectOutcome {
    pub value: usize,
    /// The probe was found non-monotone and a descending scan was used.
    pub used_fallback: bool,
    pub probes: usize,
}

/// Largest `n` in `[lo, hi]` with `probe(n)` true, assuming the probe is
/// true below some frontier and false above it.
///
/// The bisection answer is verified (`probe(n) && !probe(n + 1)`); if that
/// fails, a descending linear scan from `hi` is used instead. When no value
/// is feasible the result is `lo`.
pub fn bisect_max_feasible(lo: usize, hi: usize, mut probe: impl FnMut(usize) -> bool) -> BisectOutcome {
    assert!(lo <= hi, "empty range");
    let mut probes = 0;
    let mut call = |n: usize, probes: &mut usize| {
        *probes += 1;
        probe(n)
    };

    // invariant: `good` is feasible (or `lo`), everything above `bad` is not
    let lo_ok = call(lo, &mut probes);
    let mut good = lo;
    let mut bad = hi + 1;
    if lo_ok {
        while bad - good > 1 {
            let mid = good + (bad - good) / 2;
            if call(mid, &mut probes) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        let verified = good == hi || !call(good + 1, &mut probes);
        if verified {
            return BisectOutcome { value: good, used_fallback: false, probes };
        }
    } else if lo == 0 {
        // nothing above an infeasible lower end under monotonicity; confirm
        // the next value to catch non-monotone probes cheaply
        if hi == lo || !call(lo + 1, &mut probes) {
            return BisectOutcome { value: lo, used_fallback: false, probes };
        }
    }

    let value = (lo..=hi).rev().find(|&n| call(n, &mut probes)).unwrap_or(lo);
    BisectOutcome { value, used_fallback: true, probes }
}
