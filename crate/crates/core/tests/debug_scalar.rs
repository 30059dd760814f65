use fvcgrid_core::fvc::{
    assemble_program, recover_controller, solve_lmi, SolveConfig, VertexData,
};
use fvcgrid_core::linalg;
use nalgebra::{DMatrix, DVector};

#[test]
fn debug_scalar_case() {
    let v = VertexData {
        a_dn: DMatrix::from_row_slice(1, 1, &[-1.0]),
        b_dg: DMatrix::from_row_slice(1, 1, &[1.0]),
        b_nr: DVector::from_vec(vec![1.0]),
        signature: String::new(),
    };
    let c = DMatrix::from_row_slice(1, 1, &[1.0]);
    let prog = assemble_program(vec![v.clone()], c.clone(), 100.0, 1e-7, true).unwrap();
    let cert = solve_lmi(&prog, &SolveConfig::default()).unwrap();
    println!("J = {:.6e}", cert.j_opt);
    println!("margins: {:?}", cert.margins);
    println!(
        "L1={:.6e} L2={:.6e} L3={:.6e} L4={:.6e} L5={:.6e} U={:.6e}",
        cert.l1[(0, 0)],
        cert.l2[(0, 0)],
        cert.l3[(0, 0)],
        cert.l4[0],
        cert.l5[(0, 0)],
        cert.u_energy[(0, 0)]
    );
    let fvc = recover_controller(&cert).unwrap();
    println!(
        "A_FF={:.6e} B_FF={:.6e} C_FF={:.6e}",
        fvc.a_ff[(0, 0)],
        fvc.b_ff[0],
        fvc.c_ff[(0, 0)]
    );
    // closed loop
    let a_cl = DMatrix::from_row_slice(
        2,
        2,
        &[v.a_dn[(0, 0)], fvc.c_ff[(0, 0)], 0.0, fvc.a_ff[(0, 0)]],
    );
    let b_cl = DMatrix::from_column_slice(2, 1, &[v.b_nr[0], fvc.b_ff[0]]);
    let c_cl = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let ss = fvcgrid_core::ssanalysis::StateSpace::new(a_cl.clone(), b_cl.clone(), c_cl.clone()).unwrap();
    let swept = fvcgrid_core::ssanalysis::hinf_norm(&ss, 1e-9).unwrap();
    println!("swept = {:.6e}", swept);
    // DC value
    println!("G(0) = {:?}", ss.dc_gain().unwrap()[(0, 0)]);
    // Evaluate the bounded-real block at the solution.
    let vars = fvcgrid_core::fvc::SynthesisVars {
        j: cert.j_opt,
        l1: cert.l1.clone(),
        l2: cert.l2.clone(),
        l3: cert.l3.clone(),
        l4: cert.l4.clone(),
        l5: cert.l5.clone(),
        u: cert.u_energy.clone(),
    };
    let c1 = prog.eval_bounded_real(&v, &vars);
    println!("C1 =\n{:.6e}", c1);
    println!("max eig C1 = {:.6e}", linalg::symmetric_eig_max(&c1));

    // Reconstruct Q and form the closed-loop bounded-real matrix.
    let n = 1;
    let l1_inv = cert.l1.clone().try_inverse().unwrap();
    let l2_inv = cert.l2.clone().try_inverse().unwrap();
    let u_blk = &l1_inv - &l2_inv;
    let mut q = DMatrix::zeros(2, 2);
    q[(0, 0)] = l1_inv[(0, 0)];
    q[(0, 1)] = u_blk[(0, 0)];
    q[(1, 0)] = u_blk[(0, 0)];
    q[(1, 1)] = u_blk[(0, 0)];
    let a_od = a_cl.clone();
    let b_od = b_cl.column(0).clone_owned();
    let c_od = c_cl.clone();
    let mut c_n = DMatrix::zeros(4, 4);
    let qa = &q * &a_od;
    c_n.view_mut((0, 0), (2, 2)).copy_from(&(&qa + qa.transpose()));
    let qb = &q * &b_od;
    c_n[(0, 2)] = qb[0];
    c_n[(1, 2)] = qb[1];
    c_n[(2, 0)] = qb[0];
    c_n[(2, 1)] = qb[1];
    c_n[(2, 2)] = -1.0;
    c_n[(0, 3)] = c_od[(0, 0)];
    c_n[(3, 0)] = c_od[(0, 0)];
    c_n[(1, 3)] = c_od[(0, 1)];
    c_n[(3, 1)] = c_od[(0, 1)];
    c_n[(3, 3)] = -cert.j_opt;
    println!("C_N =\n{:.6e}", c_n);
    println!("max eig C_N = {:.6e}", linalg::symmetric_eig_max(&c_n));
    // Congruence residual.
    let mut t = DMatrix::zeros(2, 2);
    t[(0, 0)] = cert.l2[(0, 0)];
    t[(0, 1)] = cert.l1[(0, 0)];
    t[(1, 0)] = -cert.l2[(0, 0)];
    let mut t_ext = DMatrix::identity(4, 4);
    t_ext.view_mut((0, 0), (2, 2)).copy_from(&t);
    let c1_cong = t_ext.transpose() * &c_n * &t_ext;
    println!("T'C_N T =\n{:.6e}", c1_cong);
    println!(
        "congruence residual = {:.3e}",
        linalg::max_abs(&(&c1 - &c1_cong))
    );
    let _ = n;
}
