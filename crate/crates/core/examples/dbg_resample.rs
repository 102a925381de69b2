fn main() {
    use cwid_core::dsp::*;
    let fs = 96_000.0;
    let n = 4096;
    let samples: Vec<f64> = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * 5_000.0 * i as f64 / fs).cos())
        .collect();
    let a = SampledSignal::new(samples, fs).unwrap();
    let factor = 1.0008783783783783_f64;
    let scaled = resample_time_scale(&a, factor).unwrap();
    let back = resample_time_scale(&scaled, 1.0 / factor).unwrap();
    let mut max_err: f64 = 0.0;
    let mut max_idx = 0;
    for m in 200..back.len().min(n) - 200 {
        let e = (back.samples()[m] - a.samples()[m]).abs();
        if e > max_err { max_err = e; max_idx = m; }
    }
    println!("max err {max_err:.3e} at {max_idx}, back len {} orig len {}", back.len(), n);
    println!("back[200]={} a[200]={}", back.samples()[200], a.samples()[200]);
}
