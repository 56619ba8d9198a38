//! Cross-checks against independent implementations: dense linear algebra
//! for states and entropy, numerical quadrature for the decay histogram.

use kaon_core::constants::Parent;
use kaon_core::decay::contamination_histogram;
use kaon_core::pair::{build_phi_mass_basis, build_phi_strangeness_basis, entropy_surface};
use kaon_core::{
    Basis, ComplexAmplitude as C, PhysicalConstants, Side, SingleKaonState, TwoKaonState,
};
use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// ρ_side from the full 4×4 projector, summing out the other index by hand.
fn brute_reduced(s: &TwoKaonState, side: Side) -> Matrix2<C> {
    let a = s.amplitudes();
    let psi = Vector4::from_column_slice(&a);
    let full: Matrix4<C> = psi * psi.adjoint();
    let mut rho = Matrix2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let (row, col) = match side {
                    Side::Left => (2 * i + k, 2 * j + k),
                    Side::Right => (2 * k + i, 2 * k + j),
                };
                rho[(i, j)] += full[(row, col)];
            }
        }
    }
    rho
}

fn oracle_entropy(rho: &Matrix2<C>) -> f64 {
    let eig = rho.symmetric_eigen();
    eig.eigenvalues
        .iter()
        .filter(|&&l| l > 1e-300)
        .map(|&l| -l * l.log2())
        .sum()
}

#[test]
fn reduced_density_matrix_matches_outer_product() {
    for r in [c(-1.0, 0.0), c(0.3, -0.7), c(1.5, 2.0), c(0.0, 0.0)] {
        let s = build_phi_strangeness_basis(r).unwrap();
        for side in [Side::Left, Side::Right] {
            let ours = s.reduced_density_matrix(side).entries();
            let brute = brute_reduced(&s, side);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((ours[i][j] - brute[(i, j)]).norm() < 1e-14);
                }
            }
        }
    }
}

#[test]
fn r_minus_one_reduced_state() {
    let s = build_phi_strangeness_basis(c(-1.0, 0.0)).unwrap();
    let rho = brute_reduced(&s, Side::Left);
    let want = [[1.0 / 6.0, -1.0 / 6.0], [-1.0 / 6.0, 5.0 / 6.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((rho[(i, j)] - c(want[i][j], 0.0)).norm() < 1e-14);
        }
    }
    let s_oracle = oracle_entropy(&rho);
    assert!((s.entropy(Side::Left) - s_oracle).abs() < 1e-12);
    assert!((s_oracle - 0.5500).abs() < 1e-4);
}

#[test]
fn entropy_surface_matches_eigen_oracle() {
    let pts = entropy_surface((-2.0, 2.0), (-1.0, 1.0), 9).unwrap();
    assert_eq!(pts.len(), 81);
    for p in pts {
        let s = build_phi_strangeness_basis(c(p.re_r, p.im_r)).unwrap();
        let o = oracle_entropy(&brute_reduced(&s, Side::Left));
        assert!((p.entropy - o).abs() < 1e-10, "{p:?} vs {o}");
    }
}

#[test]
fn mass_and_strangeness_builders_agree() {
    // the strangeness-basis builder is the mass-basis state with R′ = 0
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let u = Matrix2::new(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0));
    let u2 = u.kronecker(&u);
    for r in [c(-1.0, 0.0), c(0.4, 0.9), c(-1.7, -0.2)] {
        let m = build_phi_mass_basis(r, c(0.0, 0.0)).unwrap();
        let mv = Vector4::from_column_slice(&m.amplitudes());
        let sv = u2 * mv;
        let s = build_phi_strangeness_basis(r).unwrap().amplitudes();
        // fix the global phase from the largest component
        let k = (0..4)
            .max_by(|&a, &b| sv[a].norm().total_cmp(&sv[b].norm()))
            .unwrap();
        let phase = s[k] / sv[k];
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        for i in 0..4 {
            assert!((sv[i] * phase - s[i]).norm() < 1e-12);
        }
    }
}

/// exp(−iHt) in the strangeness basis with H = U diag(−iΓ_S/2, Δm − iΓ_L/2) U.
fn propagate(psi: Vector2<C>, t: f64, k: &PhysicalConstants) -> Vector2<C> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let u = Matrix2::new(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0));
    let d = Matrix2::new(
        c(0.0, -0.5 * k.gamma_s),
        c(0.0, 0.0),
        c(0.0, 0.0),
        c(k.delta_m, -0.5 * k.gamma_l),
    );
    let ham = u * d * u;
    (ham * c(0.0, -t)).exp() * psi
}

proptest! {
    #[test]
    fn evolution_matches_matrix_exponential(
        a in (-1.0..1.0f64, -1.0..1.0f64),
        b in (-1.0..1.0f64, -1.0..1.0f64),
        t in 0.0..15.0f64,
    ) {
        prop_assume!(a.0.abs() + a.1.abs() + b.0.abs() + b.1.abs() > 0.1);
        let k = PhysicalConstants::pdg();
        let s = SingleKaonState::new(Basis::Strangeness, c(a.0, a.1), c(b.0, b.1)).unwrap();
        let e = s.evolve(t, &k).unwrap();
        let oracle = propagate(Vector2::from_column_slice(&s.amplitudes()), t, &k);
        let survival = oracle.norm_squared();
        prop_assert!((e.norm_tracked() - survival).abs() < 1e-10 * survival.max(1e-3));
        let ours = e.amplitudes();
        let scale = survival.sqrt();
        for i in 0..2 {
            prop_assert!((ours[i] * scale - oracle[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn entropy_matches_oracle_for_random_pairs(
        amps in prop::array::uniform8(-1.0..1.0f64),
    ) {
        let v = [c(amps[0], amps[1]), c(amps[2], amps[3]), c(amps[4], amps[5]), c(amps[6], amps[7])];
        prop_assume!(v.iter().map(|x| x.norm_sqr()).sum::<f64>() > 1e-3);
        let s = TwoKaonState::new(Basis::Strangeness, v).unwrap();
        for side in [Side::Left, Side::Right] {
            let o = oracle_entropy(&brute_reduced(&s, side));
            prop_assert!((s.entropy(side) - o).abs() < 1e-9);
        }
        // entropy is basis independent
        let m = s.in_basis(Basis::Mass);
        prop_assert!((m.entropy(Side::Left) - s.entropy(Side::Left)).abs() < 1e-9);
    }
}

fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
    h * (0.5 * f(a) + inner + 0.5 * f(b))
}

#[test]
fn histogram_matches_trapezoid_quadrature() {
    let k = PhysicalConstants::pdg();
    let density = |gamma: f64| move |t: f64| gamma * (-gamma * (t - 10.0)).exp();
    let bins = contamination_histogram(10.0, 25.0, 1.0, &k).unwrap();
    assert_eq!(bins.len(), 15);
    for b in bins {
        let n = 1000;
        let kl =
            trapezoid(density(k.gamma_l), b.bin_start, b.bin_end, n) * k.two_pion_ratio(Parent::KL);
        let ks =
            trapezoid(density(k.gamma_s), b.bin_start, b.bin_end, n) * k.two_pion_ratio(Parent::KS);
        let oracle = kl / ks;
        assert!(
            ((b.ratio - oracle) / oracle).abs() < 1e-6,
            "{b:?} vs {oracle}"
        );
    }
}
