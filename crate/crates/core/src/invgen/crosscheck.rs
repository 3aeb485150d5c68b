//! Bounded concrete confirmation of reported invariants.

use serde::{Deserialize, Serialize};

use super::{InvGenError, InvariantReport};
use crate::assertion::{Assertion, PredicateRegistry};
use crate::frontend::ast::{Cond, Func, Stmt};
use crate::frontend::{inline_calls, split_program};
use crate::oracle::{
    concrete_exec, entails_oracle, eval_cond, models, satisfies, Fault, OracleConfig, OracleError, DEFAULT_ITERATION_CAP,
};
use crate::symexec::{ExecConfig, SymExec};

/// Outcome for one loop on models with at most `max_addrs` objects.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub pre_in_inv: bool,
    /// Every invariant model entering the loop lands in the invariant again.
    pub step_closed: bool,
    /// Invariant models that entered the body.
    pub entered: usize,
    /// Models the concrete interpreter could not run (unset variable and
    /// the like).
    pub skipped: usize,
}

impl OracleCheck {
    pub fn ok(&self) -> bool {
        self.pre_in_inv && self.step_closed
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CrossCheckError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Engine(#[from] InvGenError),
}

/// Checks one loop: `pre` inside `inv`, and `inv` closed under one body run.
pub fn oracle_check_loop(
    reg: &PredicateRegistry,
    pre: &Assertion,
    cond: &Cond,
    body: &Stmt,
    inv: &Assertion,
    cfg: OracleConfig,
) -> Result<OracleCheck, OracleError> {
    let mut out = OracleCheck { pre_in_inv: entails_oracle(reg, pre, inv, cfg)?, step_closed: true, ..Default::default() };
    let mut vars = inv.prog_vars();
    vars.extend(pre.prog_vars());
    for m in models(reg, inv, &vars, cfg)? {
        match eval_cond(&m, cond) {
            Ok(true) => {}
            Ok(false) => continue,
            Err(_) => {
                out.skipped += 1;
                continue;
            }
        }
        out.entered += 1;
        match concrete_exec(&m, body, DEFAULT_ITERATION_CAP) {
            Ok(next) => {
                if !satisfies(reg, &next, inv) {
                    out.step_closed = false;
                    break;
                }
            }
            Err(Fault::Unsupported { .. } | Fault::IterationCap { .. }) => out.skipped += 1,
            Err(_) => {
                out.step_closed = false;
                break;
            }
        }
    }
    Ok(out)
}

/// Oracle checks for the top-level loops of `func`, in source order, using
/// the invariants in `loops` (as returned by `verify_function`).
pub fn oracle_check_func(
    reg: &PredicateRegistry,
    func: &Func,
    funcs: &[Func],
    loops: &[InvariantReport],
    exec: ExecConfig,
    cfg: OracleConfig,
) -> Result<Vec<OracleCheck>, CrossCheckError> {
    let x = SymExec::with_config(reg, exec);
    let mut rest = inline_calls(&func.body, funcs).map_err(InvGenError::from)?;
    let mut pre = func.requires.clone();
    let mut out = vec![];
    for rep in loops {
        let sp = split_program(&rest).map_err(InvGenError::from)?;
        let head = x.exec(&pre, &sp.before).map_err(InvGenError::from)?;
        out.push(oracle_check_loop(reg, &head, &sp.cond, &sp.body, &rep.invariant, cfg)?);
        pre = x.assume_false(&rep.invariant, &sp.cond).map_err(InvGenError::from)?;
        rest = sp.after;
    }
    Ok(out)
}
