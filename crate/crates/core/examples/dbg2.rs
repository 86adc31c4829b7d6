fn main() {
    use nonlocal_forms::kernels::*;
    use nonlocal_forms::forms::diffusion_matrix;
    for seed in [1u64, 9] {
        let fam = KernelFamily::perturbed(Mollifier::power_law(2), 2.0, seed).unwrap();
        let m = diffusion_matrix(&fam, &[0.0, 0.0], 0.5, &[1.5, 1.9], 1e-3).unwrap();
        println!("seed {seed}: {:?}", m.entries);
        let k = fam.at(1.5).unwrap();
        println!("  point kernel: {}", k.eval(&[0.1, 0.2], &[0.3, 0.15]).unwrap());
    }
}
