//! Integer sweeps written as `a..b:step` or `a..b:xk`.

use super::BenchError;

/// Parses an inclusive sweep.
///
/// `10..70:10` steps additively, `15..240:x2` multiplies, `30` is a single
/// value and `4,8,12` an explicit list.
pub fn parse_sweep(s: &str) -> Result<Vec<usize>, BenchError> {
    let bad = |why: &str| BenchError::InvalidConfig(format!("sweep {s:?}: {why}"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad("expected non-negative integers"));
    if s.contains(',') {
        return s.split(',').map(num).collect();
    }
    let Some((lo, rest)) = s.split_once("..") else {
        return Ok(vec![num(s)?]);
    };
    let (hi, step) = rest.split_once(':').unwrap_or((rest, "1"));
    let (lo, hi) = (num(lo)?, num(hi)?);
    if lo > hi {
        return Err(bad("start exceeds end"));
    }
    let mut out = vec![lo];
    if let Some(f) = step.strip_prefix('x') {
        let f = num(f)?;
        if f < 2 || lo == 0 {
            return Err(bad("geometric sweeps need factor >= 2 and a positive start"));
        }
        while let Some(v) = out.last().unwrap().checked_mul(f).filter(|v| *v <= hi) {
            out.push(v);
        }
    } else {
        let d = num(step)?;
        if d == 0 {
            return Err(bad("step must be positive"));
        }
        while let Some(v) = out.last().unwrap().checked_add(d).filter(|v| *v <= hi) {
            out.push(v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_forms() {
        assert_eq!(parse_sweep("10..70:10").unwrap(), vec![10, 20, 30, 40, 50, 60, 70]);
        assert_eq!(parse_sweep("15..240:x2").unwrap(), vec![15, 30, 60, 120, 240]);
        assert_eq!(parse_sweep("15..100:x2").unwrap(), vec![15, 30, 60]);
        assert_eq!(parse_sweep("30").unwrap(), vec![30]);
        assert_eq!(parse_sweep("4, 8,12").unwrap(), vec![4, 8, 12]);
        assert_eq!(parse_sweep("3..5").unwrap(), vec![3, 4, 5]);
        for bad in ["", "9..3", "1..5:0", "0..5:x2", "1..5:x1", "a..b"] {
            assert!(parse_sweep(bad).is_err(), "{bad}");
        }
    }
}
