//! Deterministic synthetic stand-in for the public stroke CSV.

use std::fmt::Write as _;

use strokekit::seed::splitmix64;

/// Small deterministic generator, independent of the library's RNG stack.
pub struct Gen(u64);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(splitmix64(seed ^ 0x5eed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        splitmix64(self.0)
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.unit().max(1e-300);
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// CSV with the public file's header and value vocabulary. Stroke risk is
/// driven mostly by age, then glucose, hypertension, heart disease and BMI.
/// Roughly 4% of BMI cells are `N/A` and one gender cell is `Other`.
pub fn synthetic_stroke_csv(n: usize, seed: u64) -> String {
    let mut g = Gen::new(seed);
    let mut out = String::from(
        "id,gender,age,hypertension,heart_disease,ever_married,work_type,Residence_type,avg_glucose_level,bmi,smoking_status,stroke\n",
    );
    for i in 0..n {
        let age = if g.chance(0.15) {
            (g.unit() * 16.0 * 100.0).round() / 100.0 + 0.08
        } else {
            (16.0 + g.unit() * 66.0).round()
        };
        let gender = if i == 3 {
            "Other"
        } else if g.chance(0.41) {
            "Male"
        } else {
            "Female"
        };
        let a = (age - 45.0) / 20.0;
        let hypertension = u8::from(g.chance(sigmoid(-2.6 + 1.1 * a)));
        let heart = u8::from(g.chance(sigmoid(-3.2 + 1.2 * a)));
        let married = if age > 25.0 && g.chance(0.85) { "Yes" } else { "No" };
        let work = if age < 16.0 {
            if g.chance(0.95) { "children" } else { "Never_worked" }
        } else {
            ["Private", "Private", "Private", "Self-employed", "Govt_job"][g.below(5)]
        };
        let residence = if g.chance(0.5) { "Urban" } else { "Rural" };
        let diabetic = g.chance(0.12 + 0.08 * a.max(0.0));
        let glucose = if diabetic {
            170.0 + 40.0 * g.normal().abs()
        } else {
            (90.0 + 18.0 * g.normal()).max(55.0)
        };
        let bmi = (20.0 + 0.15 * age.min(60.0) + 5.0 * g.normal()).clamp(12.0, 70.0);
        let smoking = if age < 16.0 {
            "Unknown"
        } else {
            ["never smoked", "formerly smoked", "smokes", "Unknown"][g.below(4)]
        };
        let z = -4.2
            + 2.4 * a
            + 0.9 * f64::from(hypertension)
            + 0.8 * f64::from(heart)
            + 0.012 * (glucose - 100.0)
            + 0.04 * (bmi - 28.0);
        let stroke = u8::from(g.chance(sigmoid(z)));
        let bmi_cell = if g.chance(0.04) {
            "N/A".to_string()
        } else {
            format!("{bmi:.1}")
        };
        writeln!(
            out,
            "{},{gender},{age},{hypertension},{heart},{married},{work},{residence},{glucose:.2},{bmi_cell},{smoking},{stroke}",
            10_000 + i
        )
        .unwrap();
    }
    out
}

pub fn write_synthetic(dir: &std::path::Path, n: usize, seed: u64) -> std::path::PathBuf {
    let path = dir.join("synthetic.csv");
    std::fs::write(&path, synthetic_stroke_csv(n, seed)).unwrap();
    path
}
