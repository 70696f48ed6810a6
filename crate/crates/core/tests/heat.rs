use bespectral::be::{BeOperator, HeatScheme, Potential};
use bespectral::graph::families::ring;

const N: usize = 12;

/// Heavier potential on the nodes 1..=5 side of node 0.
fn lopsided() -> Potential {
    Potential::new((0..N).map(|i| if (1..=5).contains(&i) { 3.0 } else { 1.0 }).collect()).unwrap()
}

fn spike() -> Vec<f64> {
    let mut f = vec![0.0; N];
    f[0] = 1.0;
    f
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn rk4_agrees_with_spectral_solution() {
    let g = ring(N);
    let be = BeOperator::new(&g, lopsided()).unwrap();
    let exact = be.heat_flow(&spike(), 1.0, HeatScheme::Spectral).unwrap();
    let rk4 = be.heat_flow(&spike(), 1.0, HeatScheme::Rk4 { dt: 1e-3 }).unwrap();
    assert!(max_gap(&exact, &rk4) < 1e-6, "{}", max_gap(&exact, &rk4));
}

#[test]
fn euler_is_first_order() {
    let g = ring(N);
    let be = BeOperator::new(&g, lopsided()).unwrap();
    let exact = be.heat_flow(&spike(), 1.0, HeatScheme::Spectral).unwrap();
    let coarse = max_gap(&exact, &be.heat_flow(&spike(), 1.0, HeatScheme::Euler { dt: 2e-3 }).unwrap());
    let fine = max_gap(&exact, &be.heat_flow(&spike(), 1.0, HeatScheme::Euler { dt: 1e-3 }).unwrap());
    assert!(fine < 1e-3, "{fine}");
    let ratio = coarse / fine;
    assert!((1.8..2.2).contains(&ratio), "{ratio}");
}

#[test]
fn potential_biases_the_spread() {
    let g = ring(N);
    let side = |f: &[f64], nodes: &[usize]| nodes.iter().map(|&i| f[i]).sum::<f64>();
    let heavy: Vec<usize> = (1..=5).collect();
    let light: Vec<usize> = (7..=11).collect();

    let flat = BeOperator::new(&g, Potential::constant(N, 1.0).unwrap()).unwrap();
    let f = flat.heat_flow(&spike(), 1.0, HeatScheme::Spectral).unwrap();
    assert!((side(&f, &heavy) - side(&f, &light)).abs() < 1e-12);

    let be = BeOperator::new(&g, lopsided()).unwrap();
    let f = be.heat_flow(&spike(), 1.0, HeatScheme::Spectral).unwrap();
    assert!(side(&f, &heavy) > 1.5 * side(&f, &light), "{} vs {}", side(&f, &heavy), side(&f, &light));
    assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}
