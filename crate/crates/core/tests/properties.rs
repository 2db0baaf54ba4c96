//! Randomized structural properties of the Hamiltonian and the operators.

use proptest::prelude::*;

use hjlab::estimates::cd_defect_field;
use hjlab::grid::make_grid;
use hjlab::hamiltonian::{Coefficient, HamiltonianSpec};
use hjlab::{spectral, Field, VectorField};

fn trig_field(dim: usize, n: usize, coeffs: &[(f64, f64)]) -> Field {
    let g = make_grid(dim, n).unwrap();
    Field::from_fn(&g, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let k = (k + 1) as f64;
                let arg = k * x[0] + if dim == 2 { (k - 2.0) * x[dim - 1] } else { 0.0 };
                a * arg.cos() + b * arg.sin()
            })
            .sum()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fenchel_young_holds(
        gamma in 1.2f64..4.0,
        c0 in 0.2f64..3.0,
        amp in 0.0f64..0.8,
        x in prop::array::uniform2(0.0f64..std::f64::consts::TAU),
        p in prop::array::uniform2(-3.0f64..3.0),
        nu in prop::array::uniform2(-3.0f64..3.0),
    ) {
        let spec = HamiltonianSpec::new(gamma, c0, 0.05, Coefficient::CosBump { amplitude: amp }).unwrap();
        let h = spec.eval_h(&x, &p);
        let l = spec.legendre(&x, &nu).unwrap();
        let pairing = p[0] * nu[0] + p[1] * nu[1];
        prop_assert!(h + l >= pairing - 1e-9 * (1.0 + h.abs() + l.abs()));

        // equality along ν = H_p(x, p)
        let hp = spec.eval_hp(&x, &p).unwrap();
        let l_eq = spec.legendre(&x, &hp).unwrap();
        let pairing_eq = p[0] * hp[0] + p[1] * hp[1];
        prop_assert!((h + l_eq - pairing_eq).abs() <= 1e-7 * (1.0 + pairing_eq.abs()));
    }

    #[test]
    fn nonlocal_carre_du_champ_is_nonnegative(
        s in 0.1f64..0.9,
        coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..6),
    ) {
        let u = trig_field(1, 64, &coeffs);
        let i = spectral::nonlocal_carre_du_champ(&spectral::gradient(&u), s).unwrap();
        let scale = 1.0 + i.sup_norm();
        prop_assert!(i.min() >= -1e-10 * scale);
    }

    #[test]
    fn cd_defect_is_nonpositive_in_two_dimensions(
        coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..5),
    ) {
        let u = trig_field(2, 32, &coeffs);
        let scale = 1.0 + spectral::hessian_norm_squared(&u).sup_norm();
        prop_assert!(cd_defect_field(&u).max() <= 1e-10 * scale);
    }

    #[test]
    fn gradient_and_divergence_are_adjoint(
        a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..5),
        b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..5),
    ) {
        let u = trig_field(2, 16, &a);
        let v = trig_field(2, 16, &b);
        let field = VectorField::new(vec![v.clone(), v.scale(-0.5)]).unwrap();
        let lhs = spectral::gradient(&u).dot(&field).integral();
        let rhs = -u.inner(&spectral::divergence(&field));
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }
}
