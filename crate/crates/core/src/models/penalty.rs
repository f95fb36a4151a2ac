use super::field::FieldStructure;
use crate::error::Result;
use crate::mcmc::Hyper;
use crate::PriorKind;

/// Log prior of the field with the LMA auxiliaries integrated out, up to
/// constants: `−‖Δη‖²/(2ξ²)` for a GRF, `−λ‖Δη‖₁` for an LMA. `Δ` is the
/// operator of the field structure at the current `κ²`.
pub fn penalty_logprior(field: &FieldStructure, eta: &[f64], hyper: &Hyper) -> Result<f64> {
    match field.prior() {
        PriorKind::Grf => {
            let l = field.l(hyper.kappa2)?;
            Ok(-field.grf_quad(&l, eta) / (2.0 * hyper.xi2))
        }
        PriorKind::Lma => {
            let t = field.lma_operator(hyper.kappa2)?.mul_vec(eta);
            Ok(-hyper.lambda2.sqrt() * t.iter().map(|v| v.abs()).sum::<f64>())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{graph_laplacian, GraphSupport};

    fn pair(prior: PriorKind) -> FieldStructure {
        let g = GraphSupport::new(2, &[(0, 1)]).unwrap();
        FieldStructure::graph(&graph_laplacian(&g), 1, prior).unwrap()
    }

    #[test]
    fn zero_field() {
        let h = Hyper::default();
        for p in [PriorKind::Grf, PriorKind::Lma] {
            assert_eq!(penalty_logprior(&pair(p), &[0.0, 0.0], &h).unwrap(), 0.0);
        }
    }

    #[test]
    fn two_node_first_order() {
        // Δη = (κ²η₁ + η₁ − η₂, κ²η₂ + η₂ − η₁) = (3, −3)
        let h = Hyper { xi2: 2.0, lambda2: 4.0, ..Hyper::default() };
        let eta = [1.0, -1.0];
        let grf = penalty_logprior(&pair(PriorKind::Grf), &eta, &h).unwrap();
        assert!((grf - (-18.0 / 4.0)).abs() < 1e-12);
        let lma = penalty_logprior(&pair(PriorKind::Lma), &eta, &h).unwrap();
        assert!((lma - (-2.0 * 6.0)).abs() < 1e-12);
        let half = Hyper { lambda2: 1.0, ..h };
        let lma_half = penalty_logprior(&pair(PriorKind::Lma), &eta, &half).unwrap();
        assert!((lma_half - lma / 2.0).abs() < 1e-12);
    }
}
