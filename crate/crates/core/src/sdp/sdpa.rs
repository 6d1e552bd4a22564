//! Debug dump in SDPA sparse format (`.dat-s`).
//!
//! SDPA's dual form `max <F0, Y>` s.t. `<Fi, Y> = ci`, `Y PSD` matches our
//! primal with `Fi = A_i`, `ci = b_i` and `F0 = -C`, so the SDPA dual value is
//! the negated primal objective (without the constant offset). Free variables
//! are split as `x = x+ - x-` into one trailing diagonal (LP) block.

use std::fmt::Write as _;

use super::SdpProblem;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders `problem` in SDPA sparse format with 17 significant digits.
pub fn write_sdpa(problem: &SdpProblem) -> String {
    let mut s = String::new();
    let nb = problem.block_dims.len();
    let has_lp = problem.free_vars > 0;
    let _ = writeln!(s, "\"objective offset {}\"", num(problem.objective_offset));
    let _ = writeln!(s, "{}", problem.num_constraints());
    let _ = writeln!(s, "{}", nb + usize::from(has_lp));
    let mut dims: Vec<String> = problem.block_dims.iter().map(|d| d.to_string()).collect();
    if has_lp {
        dims.push(format!("-{}", 2 * problem.free_vars));
    }
    let _ = writeln!(s, "{}", dims.join(" "));
    let rhs: Vec<String> = problem.constraints.iter().map(|c| num(c.rhs)).collect();
    let _ = writeln!(s, "{}", rhs.join(" "));

    let lp_block = nb + 1;
    let mut emit = |mat: usize, f: &super::LinearFunctional, sign: f64| {
        for e in &f.entries {
            let _ = writeln!(
                s,
                "{mat} {} {} {} {}",
                e.block + 1,
                e.row + 1,
                e.col + 1,
                num(sign * e.value)
            );
        }
        for &(v, c) in &f.free {
            let _ = writeln!(s, "{mat} {lp_block} {0} {0} {1}", 2 * v + 1, num(sign * c));
            let _ = writeln!(s, "{mat} {lp_block} {0} {0} {1}", 2 * v + 2, num(-sign * c));
        }
    };
    emit(0, &problem.objective, -1.0);
    for (i, c) in problem.constraints.iter().enumerate() {
        emit(i + 1, &c.lhs, 1.0);
    }
    s
}
