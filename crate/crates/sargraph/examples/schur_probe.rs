fn main() {
    use nalgebra::DMatrix;
    let z = DMatrix::<f64>::zeros(10, 10);
    println!("zero 10x10: {:?}", z.clone().try_schur(1e-13, 10000).is_some());
    let d = DMatrix::<f64>::identity(10, 10) * 2.0;
    println!("diag 10x10: {:?}", d.clone().try_schur(1e-13, 10000).is_some());
    let mut nil = DMatrix::<f64>::zeros(6, 6);
    nil[(0, 3)] = 1.0; nil[(1, 4)] = 0.5; nil[(2, 5)] = 0.25;
    println!("nilpotent 6x6: {:?}", nil.clone().try_schur(1e-13, 10000).is_some());
    let mut m = DMatrix::<f64>::zeros(4, 4);
    m[(0, 1)] = 0.3; m[(1, 0)] = 0.3;
    println!("tiny sym-pair 4x4: {:?}", m.clone().try_schur(1e-13, 10000).is_some());
    // strip-5 M with small psi (the sampler's init state)
    let mut w21 = DMatrix::<f64>::zeros(5, 5);
    w21[(0,1)] = 1.0; w21[(2,1)] = 0.5; w21[(2,3)] = 0.5; w21[(4,3)] = 1.0;
    let mut w12 = DMatrix::<f64>::zeros(5, 5);
    w12[(1,0)] = 0.5; w12[(1,2)] = 0.5; w12[(3,2)] = 0.5; w12[(3,4)] = 0.5;
    let p1 = DMatrix::<f64>::from_element(2, 2, 1e-4);
    let p2 = DMatrix::<f64>::from_element(2, 2, 1e-4);
    let mut m2 = DMatrix::<f64>::zeros(10, 10);
    for bi in 0..2 { for bj in 0..2 { for i in 0..5 { for j in 0..5 {
        m2[(bi*5+i, bj*5+j)] = p1[(bj,bi)]*w21[(i,j)] + p2[(bj,bi)]*w12[(i,j)];
    }}}}
    println!("strip eps-M 10x10: {:?}", m2.clone().try_schur(1e-13, 10000).is_some());
}
