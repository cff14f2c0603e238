//! User-supplied expression strings compiled to real functions of one variable.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::RealFn;

thread_local! {
    static BUILTINS: meval::Context<'static> = meval::Context::new();
}

/// Compile `src` as a function of the variable `var` (e.g. `"x"` or `"z"`).
pub fn compile(src: &str, var: &'static str) -> Result<RealFn> {
    let expr: meval::Expr = src
        .parse()
        .map_err(|e| Error::Config(format!("cannot parse expression `{src}`: {e}")))?;
    // probe once so unknown names fail at load time rather than mid-simulation
    BUILTINS
        .with(|ctx| expr.eval_with_context(((var, 0.5), ctx)))
        .map_err(|e| Error::Config(format!("cannot evaluate expression `{src}`: {e}")))?;
    Ok(Arc::new(move |v: f64| {
        BUILTINS
            .with(|ctx| expr.eval_with_context(((var, v), ctx)))
            .unwrap_or(f64::NAN)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compiles_and_evaluates() {
        let f = compile("2*x^2 - exp(-x)", "x").unwrap();
        assert!((f(1.0) - (2.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(compile("y + 1", "x").is_err());
        assert!(compile("x +* 1", "x").is_err());
    }
}
