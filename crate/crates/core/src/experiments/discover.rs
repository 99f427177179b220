//! Ranking domains by how well they predict labels on their own.

use std::fmt::Write as _;

use super::parallel::parallel_map;
use crate::error::{Error, Result};
use crate::seeding;
use crate::synth::Dataset;
use crate::training::{evaluate, train, Objective, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct AsymmetryRanking {
    /// `(domain, held-out standalone accuracy)`, best first; equal accuracies
    /// are ordered by domain name.
    pub ranked: Vec<(String, f64)>,
    pub recommended_target: String,
}

impl AsymmetryRanking {
    pub fn to_text(&self) -> String {
        let mut s = format!("recommended_target = {:?}\n", self.recommended_target);
        for (i, (name, acc)) in self.ranked.iter().enumerate() {
            writeln!(
                s,
                "rank_{} = {{ domain = {name:?}, accuracy = {acc:?} }}",
                i + 1
            )
            .expect("string write");
        }
        s
    }
}

/// Trains a standalone ERM model per domain on `[concept | own block]` and
/// ranks domains by target-free held-out accuracy.
///
/// Each domain's run is seeded from `template.seed` and the domain name, so
/// the ranking does not depend on the order domains are listed in.
pub fn discover_asymmetry(
    ds: &Dataset,
    template: &TrainConfig,
    jobs: usize,
) -> Result<AsymmetryRanking> {
    let names: Vec<String> = ds
        .domain_names()
        .into_iter()
        .filter(|n| ds.present_domain(n).is_ok())
        .map(String::from)
        .collect();
    if names.len() < 2 {
        return Err(Error::InsufficientSamples {
            what: "asymmetry discovery domains".into(),
            needed: 2,
            found: names.len(),
        });
    }
    let results = parallel_map(&names, jobs, |name| -> Result<(String, f64)> {
        let local = ds.restrict_to_domain(name)?;
        let mut tc = template.clone();
        tc.objective = Objective::Erm;
        tc.target_domain = None;
        tc.seed = seeding::derive_seed(template.seed, &format!("discover:{name}"));
        let model = train(&local, &tc)?;
        Ok((name.clone(), evaluate(&model, &local, name)?.accuracy))
    });
    let ranked = rank(results.into_iter().collect::<Result<Vec<_>>>()?);
    Ok(AsymmetryRanking {
        recommended_target: ranked[0].0.clone(),
        ranked,
    })
}

/// Highest accuracy first, then lexicographic by name.
fn rank(mut scored: Vec<(String, f64)>) -> Vec<(String, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, DatasetConfig, DomainSpec};

    fn config(seed: u64, domains: Vec<DomainSpec>) -> DatasetConfig {
        DatasetConfig {
            seed,
            concept_dim: 4,
            num_classes: 3,
            num_supports: 600,
            domains,
            shared_fraction: 0.8,
            unique_fraction: 0.1,
            samples_per_domain: None,
            complementary: None,
        }
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 10,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn recommends_the_leaky_domain_regardless_of_order() {
        let a = DomainSpec::new("noisy", 1.5, 0.0, 4, 0.3);
        let b = DomainSpec::new("leaky", 0.0, 2.0, 4, 0.3);
        let r1 = discover_asymmetry(
            &generate(&config(5, vec![a.clone(), b.clone()])).unwrap(),
            &quick(),
            1,
        )
        .unwrap();
        assert_eq!(r1.recommended_target, "leaky");
        assert!(r1.ranked[0].1 > r1.ranked[1].1);
        assert!(r1.to_text().starts_with("recommended_target = \"leaky\""));
        let r2 =
            discover_asymmetry(&generate(&config(5, vec![b, a])).unwrap(), &quick(), 2).unwrap();
        assert_eq!(r2.recommended_target, "leaky");
    }

    #[test]
    fn ties_break_by_name() {
        let ranked = rank(vec![
            ("b".to_string(), 0.9),
            ("a".to_string(), 0.9),
            ("c".to_string(), 0.95),
        ]);
        let names: Vec<&str> = ranked.iter().map(|r| r.0.as_str()).collect();
        assert_eq!(names, ["c", "a", "b"]);
    }

    #[test]
    fn single_domain_is_rejected() {
        let ds = generate(&config(1, vec![DomainSpec::new("only", 0.0, 1.0, 2, 0.1)])).unwrap();
        assert!(discover_asymmetry(&ds, &quick(), 1).is_err());
    }
}
