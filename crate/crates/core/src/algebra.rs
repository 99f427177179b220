//! Symbolic model of domains as basis sets and the operators between them.
//!
//! A domain is `[ℂ | 𝔻_i]`: a concept basis shared by every domain and an
//! own basis that no other domain uses. Two operators combine domains:
//! the commutative one keeps only the shared concept, the right-invariant
//! one keeps its left operand. All checks compare basis sets exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Concept(usize),
    Own { domain: String, index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolicDomain {
    pub concept_basis: BTreeSet<Symbol>,
    pub own_basis: BTreeSet<Symbol>,
}

impl SymbolicDomain {
    /// Domain `tag` with `concept_dim` concept symbols and `own_dim` own symbols.
    pub fn new(tag: &str, concept_dim: usize, own_dim: usize) -> Self {
        Self {
            concept_basis: (0..concept_dim).map(Symbol::Concept).collect(),
            own_basis: (0..own_dim)
                .map(|index| Symbol::Own {
                    domain: tag.to_string(),
                    index,
                })
                .collect(),
        }
    }

    /// The all-concept domain `𝒞 = [ℂ | ∅]`.
    pub fn concept_only(concept_dim: usize) -> Self {
        Self::new("", concept_dim, 0)
    }

    pub fn is_concept_only(&self) -> bool {
        self.own_basis.is_empty()
    }

    /// The domain tag of the own basis; `None` for `𝒞`.
    pub fn tag(&self) -> Option<&str> {
        self.own_basis.iter().next().map(|s| match s {
            Symbol::Own { domain, .. } => domain.as_str(),
            Symbol::Concept(_) => "",
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .concept_basis
            .iter()
            .any(|s| !matches!(s, Symbol::Concept(_)))
        {
            return Err(Error::Contract(format!(
                "{self}: concept basis holds a domain symbol"
            )));
        }
        let tags: BTreeSet<&str> = self
            .own_basis
            .iter()
            .map(|s| match s {
                Symbol::Own { domain, .. } => Ok(domain.as_str()),
                Symbol::Concept(_) => Err(Error::Contract(format!(
                    "{self}: own basis holds a concept symbol"
                ))),
            })
            .collect::<Result<_>>()?;
        if tags.len() > 1 {
            return Err(Error::Contract(format!(
                "{self}: own basis spans several domains"
            )));
        }
        Ok(())
    }

    fn atoms(&self) -> [Atom; 2] {
        let own = match self.tag() {
            Some(t) => Atom::Own(t.to_string()),
            None => Atom::Zero,
        };
        [Atom::Concept, own]
    }
}

impl fmt::Display for SymbolicDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let concept = if self.concept_basis.is_empty() {
            "∅"
        } else {
            "ℂ"
        };
        match self.tag() {
            Some(t) => write!(f, "[{concept}|𝔻_{t}]"),
            None => write!(f, "[{concept}|∅]"),
        }
    }
}

/// Checks every member and that own bases are pairwise disjoint and
/// disjoint from a concept basis common to all members.
pub fn validate_family(domains: &[SymbolicDomain]) -> Result<()> {
    let Some(first) = domains.first() else {
        return Ok(());
    };
    let mut seen: BTreeSet<&Symbol> = BTreeSet::new();
    for d in domains {
        d.validate()?;
        if d.concept_basis != first.concept_basis {
            return Err(Error::Contract(format!(
                "{d} does not share the family's concept basis"
            )));
        }
        if let Some(s) = d.own_basis.iter().find(|s| d.concept_basis.contains(s)) {
            return Err(Error::Contract(format!("{d}: {s:?} is in both bases")));
        }
    }
    let distinct: BTreeSet<&SymbolicDomain> = domains.iter().collect();
    for d in distinct {
        for s in &d.own_basis {
            if !seen.insert(s) {
                return Err(Error::Contract(format!(
                    "own symbol {s:?} appears in two domains"
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Commutative,
    RightInvariant,
}

impl OperatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::Commutative => "commutative",
            OperatorKind::RightInvariant => "right_invariant",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `a ⊗ b`.
pub fn apply(op: OperatorKind, a: &SymbolicDomain, b: &SymbolicDomain) -> SymbolicDomain {
    match op {
        OperatorKind::Commutative => SymbolicDomain {
            concept_basis: a
                .concept_basis
                .intersection(&b.concept_basis)
                .cloned()
                .collect(),
            own_basis: BTreeSet::new(),
        },
        OperatorKind::RightInvariant => a.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axiom {
    Closure,
    Commutativity,
    Associativity,
}

impl Axiom {
    pub const ALL: [Axiom; 3] = [Axiom::Closure, Axiom::Commutativity, Axiom::Associativity];

    pub fn as_str(self) -> &'static str {
        match self {
            Axiom::Closure => "closure",
            Axiom::Commutativity => "commutativity",
            Axiom::Associativity => "associativity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomCheck {
    pub axiom: Axiom,
    pub checked: usize,
    pub failures: usize,
    /// First counterexample found.
    pub witness: Option<String>,
}

impl AxiomCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trials {
    /// Every ordered pair and triple, with repetition.
    Exhaustive,
    Random {
        count: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupReport {
    pub op: OperatorKind,
    pub set_size: usize,
    pub exhaustive: bool,
    pub checks: Vec<AxiomCheck>,
}

impl SemigroupReport {
    pub fn check(&self, axiom: Axiom) -> &AxiomCheck {
        self.checks
            .iter()
            .find(|c| c.axiom == axiom)
            .expect("every axiom is checked")
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(AxiomCheck::passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "operator = \"{}\"\nset_size = {}\nexhaustive = {}\n",
            self.op, self.set_size, self.exhaustive
        );
        for c in &self.checks {
            s.push_str(&format!(
                "{} = {{ passed = {}, checked = {}, failures = {}",
                c.axiom.as_str(),
                c.passed(),
                c.checked,
                c.failures
            ));
            if let Some(w) = &c.witness {
                s.push_str(&format!(", witness = {w:?}"));
            }
            s.push_str(" }\n");
        }
        s
    }
}

struct Tally {
    axiom: Axiom,
    checked: usize,
    failures: usize,
    witness: Option<String>,
}

impl Tally {
    fn new(axiom: Axiom) -> Self {
        Self {
            axiom,
            checked: 0,
            failures: 0,
            witness: None,
        }
    }

    fn record(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.witness.is_none() {
                self.witness = Some(witness());
            }
        }
    }

    fn finish(self) -> AxiomCheck {
        AxiomCheck {
            axiom: self.axiom,
            checked: self.checked,
            failures: self.failures,
            witness: self.witness,
        }
    }
}

/// Closure (in `domains ∪ {𝒞}`), commutativity and associativity of `op`.
///
/// `domains` must contain `𝒞`.
pub fn check_semigroup(
    op: OperatorKind,
    domains: &[SymbolicDomain],
    trials: Trials,
) -> Result<SemigroupReport> {
    validate_family(domains)?;
    if !domains.iter().any(SymbolicDomain::is_concept_only) {
        return Err(Error::Contract(
            "domain set must include the concept-only domain".into(),
        ));
    }
    let n = domains.len();
    let triples: Vec<[usize; 3]> = match trials {
        Trials::Exhaustive => (0..n * n * n)
            .map(|i| [i / (n * n), (i / n) % n, i % n])
            .collect(),
        Trials::Random { count, seed } => {
            let mut rng = seeding::stream(seed, "algebra:triples");
            (0..count)
                .map(|_| {
                    [
                        rng.random_range(0..n),
                        rng.random_range(0..n),
                        rng.random_range(0..n),
                    ]
                })
                .collect()
        }
    };
    let in_set = |d: &SymbolicDomain| domains.contains(d);
    let mut closure = Tally::new(Axiom::Closure);
    let mut commutativity = Tally::new(Axiom::Commutativity);
    let mut associativity = Tally::new(Axiom::Associativity);
    let pair_only = matches!(trials, Trials::Exhaustive);
    for &[i, j, k] in &triples {
        let (a, b, c) = (&domains[i], &domains[j], &domains[k]);
        // exhaustive mode visits each ordered pair once, at k == 0
        if !pair_only || k == 0 {
            let ab = apply(op, a, b);
            let ba = apply(op, b, a);
            closure.record(in_set(&ab), || format!("({a}, {b}) -> {ab}"));
            commutativity.record(ab == ba, || format!("({a}, {b}): {ab} vs {ba}"));
        }
        let left = apply(op, &apply(op, a, b), c);
        let right = apply(op, a, &apply(op, b, c));
        associativity.record(left == right, || {
            format!("({a}, {b}, {c}): {left} vs {right}")
        });
    }
    Ok(SemigroupReport {
        op,
        set_size: n,
        exhaustive: pair_only,
        checks: vec![
            closure.finish(),
            commutativity.finish(),
            associativity.finish(),
        ],
    })
}

/// `𝒞` plus `count` tagged domains `d0, d1, ...`.
pub fn domain_set(count: usize, concept_dim: usize, own_dim: usize) -> Vec<SymbolicDomain> {
    let mut v = vec![SymbolicDomain::concept_only(concept_dim)];
    v.extend((0..count).map(|i| SymbolicDomain::new(&format!("d{i}"), concept_dim, own_dim)));
    v
}

/// A block of a symbolic product: the concept basis, one domain's own
/// basis, or the zero term left by multiplying two disjoint own bases.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Atom {
    Concept,
    Own(String),
    Zero,
}

impl Atom {
    /// Input-space block product. Same-basis products keep their basis;
    /// disjoint own bases are orthogonal.
    fn times(&self, other: &Atom) -> Atom {
        match (self, other) {
            (Atom::Concept, Atom::Concept) => Atom::Concept,
            (Atom::Own(a), Atom::Own(b)) if a == b => Atom::Own(a.clone()),
            _ => Atom::Zero,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Concept => f.write_str("ℂ"),
            Atom::Own(t) => write!(f, "𝔻_{t}"),
            Atom::Zero => f.write_str("0"),
        }
    }
}

/// Product of encoder images. Images are idempotent, so a product is the
/// set of distinct factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageProduct(pub BTreeSet<String>);

impl fmt::Display for ImageProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.0.iter().map(String::as_str).collect();
        f.write_str(&parts.join("·"))
    }
}

/// An encoder on block atoms: the concept image, per-domain own images,
/// and the image of every other domain-specific term (including zero).
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicEncoder {
    pub concept: String,
    pub own: BTreeMap<String, String>,
    pub other_domain_terms: String,
}

impl SymbolicEncoder {
    /// Sends the concept to `ŷ` and every domain-specific term to `k`.
    pub fn commutative() -> Self {
        Self {
            concept: "ŷ".into(),
            own: BTreeMap::new(),
            other_domain_terms: "k".into(),
        }
    }

    /// Gives each listed domain its own image `k_<tag>`.
    pub fn domain_aware(tags: &[&str]) -> Self {
        Self {
            concept: "ŷ".into(),
            own: tags
                .iter()
                .map(|t| (t.to_string(), format!("k_{t}")))
                .collect(),
            other_domain_terms: "k".into(),
        }
    }

    fn image(&self, atom: &Atom) -> String {
        match atom {
            Atom::Concept => self.concept.clone(),
            Atom::Own(t) => self
                .own
                .get(t)
                .cloned()
                .unwrap_or_else(|| self.other_domain_terms.clone()),
            Atom::Zero => self.other_domain_terms.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributivityReport {
    pub holds: bool,
    /// `φ(a · bᵀ)` per block.
    pub lhs: [ImageProduct; 2],
    /// `φ(a) · φ(b)ᵀ` per block.
    pub rhs: [ImageProduct; 2],
    pub witness: Option<String>,
}

/// Evaluates `φ(a · bᵀ)` and `φ(a) · φ(b)ᵀ` blockwise and compares them.
pub fn check_distributivity(
    encoder: &SymbolicEncoder,
    a: &SymbolicDomain,
    b: &SymbolicDomain,
) -> DistributivityReport {
    let (xa, xb) = (a.atoms(), b.atoms());
    let lhs: [ImageProduct; 2] = std::array::from_fn(|i| {
        ImageProduct(BTreeSet::from([encoder.image(&xa[i].times(&xb[i]))]))
    });
    let rhs: [ImageProduct; 2] = std::array::from_fn(|i| {
        ImageProduct(BTreeSet::from([
            encoder.image(&xa[i]),
            encoder.image(&xb[i]),
        ]))
    });
    let holds = lhs == rhs;
    let witness = (!holds).then(|| {
        let block = if lhs[0] != rhs[0] { 0 } else { 1 };
        format!(
            "a = {a}, b = {b}: block {block} gives φ({}) = {} but φ({})·φ({}) = {}",
            xa[block].times(&xb[block]),
            lhs[block],
            xa[block],
            xb[block],
            rhs[block]
        )
    });
    DistributivityReport {
        holds,
        lhs,
        rhs,
        witness,
    }
}

/// `x = c^support ⊕ d_domain^component`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicSample {
    pub support: usize,
    pub domain: String,
    pub component: usize,
}

impl fmt::Display for SymbolicSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "c^{} ⊕ d_{}^{}",
            self.support, self.domain, self.component
        )
    }
}

/// Pairs every source concept with an observed target domain component.
///
/// Returns the targets unchanged followed by one fused sample per source;
/// source `i` takes the domain part of target `i mod m_τ`.
pub fn sample_fusion(
    sources: &[SymbolicSample],
    targets: &[SymbolicSample],
) -> Result<Vec<SymbolicSample>> {
    let Some(first) = targets.first() else {
        return Err(Error::Contract(
            "sample fusion needs at least one target sample to pair with".into(),
        ));
    };
    if targets.iter().any(|t| t.domain != first.domain) {
        return Err(Error::Contract(
            "target samples span several domains".into(),
        ));
    }
    let mut out = targets.to_vec();
    out.extend(sources.iter().enumerate().map(|(i, s)| SymbolicSample {
        support: s.support,
        domain: first.domain.clone(),
        component: targets[i % targets.len()].component,
    }));
    Ok(out)
}

/// Outcome of the default algebra suite.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraReport {
    pub semigroup: Vec<SemigroupReport>,
    pub distributivity: Vec<(String, DistributivityReport)>,
    pub fusion_count: (usize, usize, usize),
}

impl AlgebraReport {
    /// Commutative operator passes every axiom everywhere; right-invariant
    /// passes closure and associativity and fails commutativity with a
    /// witness; the invariant encoder distributes and the domain-aware one
    /// does not.
    pub fn as_expected(&self) -> bool {
        let semigroup = self.semigroup.iter().all(|r| match r.op {
            OperatorKind::Commutative => r.all_passed(),
            OperatorKind::RightInvariant => {
                r.check(Axiom::Closure).passed()
                    && r.check(Axiom::Associativity).passed()
                    && r.check(Axiom::Commutativity).witness.is_some()
            }
        });
        let dist = self
            .distributivity
            .iter()
            .all(|(name, d)| d.holds == !name.starts_with("domain_aware"));
        let (ms, mt, fused) = self.fusion_count;
        semigroup && dist && fused == ms + mt
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.semigroup {
            s.push_str("[[semigroup]]\n");
            s.push_str(&r.to_text());
            s.push('\n');
        }
        for (name, d) in &self.distributivity {
            s.push_str(&format!(
                "[[distributivity]]\ncase = {name:?}\nholds = {}\nlhs = \"[{} | {}]\"\nrhs = \"[{} | {}]\"\n",
                d.holds, d.lhs[0], d.lhs[1], d.rhs[0], d.rhs[1]
            ));
            if let Some(w) = &d.witness {
                s.push_str(&format!("witness = {w:?}\n"));
            }
            s.push('\n');
        }
        let (ms, mt, fused) = self.fusion_count;
        s.push_str(&format!(
            "[fusion]\nsources = {ms}\ntargets = {mt}\nfused = {fused}\npassed = {}\n",
            fused == ms + mt
        ));
        s
    }
}

/// Exhaustive semigroup checks on every set of `𝒞` plus 1 to 4 tagged
/// domains, `random_triples` random triples on `𝒞` plus 7 tagged domains,
/// the distributivity cases and a small fusion count.
pub fn algebra_suite(random_triples: usize, seed: u64) -> Result<AlgebraReport> {
    let mut semigroup = Vec::new();
    for op in [OperatorKind::Commutative, OperatorKind::RightInvariant] {
        for tagged in 1..=4 {
            semigroup.push(check_semigroup(
                op,
                &domain_set(tagged, 3, 2),
                Trials::Exhaustive,
            )?);
        }
        semigroup.push(check_semigroup(
            op,
            &domain_set(7, 3, 2),
            Trials::Random {
                count: random_triples,
                seed,
            },
        )?);
    }
    let s = SymbolicDomain::new("s", 3, 2);
    let t = SymbolicDomain::new("τ", 3, 2);
    let inv = SymbolicEncoder::commutative();
    let distributivity = vec![
        (
            "commutative_same".to_string(),
            check_distributivity(&inv, &s, &s),
        ),
        (
            "commutative_distinct".to_string(),
            check_distributivity(&inv, &s, &t),
        ),
        (
            "domain_aware_distinct".to_string(),
            check_distributivity(&SymbolicEncoder::domain_aware(&["s", "τ"]), &s, &t),
        ),
    ];
    let sample = |support, domain: &str, component| SymbolicSample {
        support,
        domain: domain.into(),
        component,
    };
    let sources: Vec<_> = (0..3).map(|i| sample(i, "s", i)).collect();
    let targets: Vec<_> = (10..12).map(|i| sample(i, "τ", i - 10)).collect();
    let fused = sample_fusion(&sources, &targets)?;
    Ok(AlgebraReport {
        semigroup,
        distributivity,
        fusion_count: (sources.len(), targets.len(), fused.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st() -> (SymbolicDomain, SymbolicDomain) {
        (
            SymbolicDomain::new("s", 3, 2),
            SymbolicDomain::new("τ", 3, 2),
        )
    }

    #[test]
    fn commutative_drops_both_domain_parts() {
        let (s, t) = st();
        let c = SymbolicDomain::concept_only(3);
        assert_eq!(apply(OperatorKind::Commutative, &s, &t), c);
        assert_eq!(apply(OperatorKind::Commutative, &t, &s), c);
        assert_eq!(c.to_string(), "[ℂ|∅]");
    }

    #[test]
    fn right_invariant_keeps_the_left_operand() {
        let (s, t) = st();
        assert_eq!(apply(OperatorKind::RightInvariant, &s, &t), s);
        assert_eq!(apply(OperatorKind::RightInvariant, &s, &s), s);
        assert_eq!(s.to_string(), "[ℂ|𝔻_s]");
    }

    #[test]
    fn semigroup_axioms_on_small_sets() {
        for tagged in 1..=4 {
            let set = domain_set(tagged, 2, 2);
            let r = check_semigroup(OperatorKind::Commutative, &set, Trials::Exhaustive).unwrap();
            assert!(r.all_passed(), "{}", r.to_text());
            let n = set.len();
            assert_eq!(r.check(Axiom::Associativity).checked, n * n * n);
            assert_eq!(r.check(Axiom::Commutativity).checked, n * n);

            let r =
                check_semigroup(OperatorKind::RightInvariant, &set, Trials::Exhaustive).unwrap();
            assert!(r.check(Axiom::Closure).passed());
            assert!(r.check(Axiom::Associativity).passed());
            assert!(!r.check(Axiom::Commutativity).passed());
        }
    }

    #[test]
    fn right_invariant_commutativity_witness_names_two_domains() {
        let (s, t) = st();
        let set = vec![s, t, SymbolicDomain::concept_only(3)];
        let r = check_semigroup(OperatorKind::RightInvariant, &set, Trials::Exhaustive).unwrap();
        let w = r.check(Axiom::Commutativity).witness.clone().unwrap();
        assert!(w.contains("𝔻_s") && w.contains("𝔻_τ"), "{w}");
    }

    #[test]
    fn random_triples_on_a_larger_set() {
        let set = domain_set(7, 3, 2);
        let trials = Trials::Random {
            count: 1000,
            seed: 9,
        };
        let r = check_semigroup(OperatorKind::Commutative, &set, trials).unwrap();
        assert!(r.all_passed());
        assert_eq!(r.check(Axiom::Associativity).checked, 1000);
    }

    #[test]
    fn semigroup_needs_the_concept_domain() {
        let (s, t) = st();
        assert!(check_semigroup(OperatorKind::Commutative, &[s, t], Trials::Exhaustive).is_err());
    }

    #[test]
    fn overlapping_own_bases_are_rejected() {
        let a = SymbolicDomain::new("a", 2, 2);
        let mut b = SymbolicDomain::new("b", 2, 2);
        b.own_basis = a.own_basis.clone();
        b.own_basis.insert(Symbol::Own {
            domain: "a".into(),
            index: 7,
        });
        assert!(validate_family(&[a, b]).is_err());
        let mut c = SymbolicDomain::new("c", 2, 1);
        c.own_basis.insert(Symbol::Concept(0));
        assert!(c.validate().is_err());
    }

    #[test]
    fn invariant_encoder_distributes() {
        let (s, t) = st();
        let enc = SymbolicEncoder::commutative();
        let same = check_distributivity(&enc, &s, &s);
        assert!(same.holds);
        assert_eq!(same.lhs[0].to_string(), "ŷ");
        assert_eq!(same.lhs[1].to_string(), "k");
        assert!(check_distributivity(&enc, &s, &t).holds);
    }

    #[test]
    fn domain_aware_encoder_fails_with_witness() {
        let (s, t) = st();
        let r = check_distributivity(&SymbolicEncoder::domain_aware(&["s", "τ"]), &s, &t);
        assert!(!r.holds);
        assert_eq!(r.rhs[1].to_string(), "k_s·k_τ");
        assert!(r.witness.unwrap().contains("block 1"));
    }

    fn samples(domain: &str, n: usize) -> Vec<SymbolicSample> {
        (0..n)
            .map(|i| SymbolicSample {
                support: i + if domain == "τ" { 100 } else { 0 },
                domain: domain.into(),
                component: i,
            })
            .collect()
    }

    #[test]
    fn fusion_counts_and_preserves_concepts() {
        let fused = sample_fusion(&samples("s", 3), &samples("τ", 2)).unwrap();
        assert_eq!(fused.len(), 5);
        assert!(fused.iter().all(|x| x.domain == "τ" && x.component < 2));
        let mut concepts: Vec<usize> = fused.iter().map(|x| x.support).collect();
        concepts.sort_unstable();
        assert_eq!(concepts, vec![0, 1, 2, 100, 101]);
        assert_eq!(fused[4].component, 0);
        assert_eq!(fused[0].to_string(), "c^100 ⊕ d_τ^0");
    }

    #[test]
    fn fusion_without_sources_returns_targets() {
        let t = samples("τ", 4);
        assert_eq!(sample_fusion(&[], &t).unwrap(), t);
        assert!(sample_fusion(&samples("s", 2), &[]).is_err());
    }

    #[test]
    fn default_suite_is_as_expected() {
        let r = algebra_suite(1000, 0).unwrap();
        assert!(r.as_expected(), "{}", r.to_text());
        assert!(r.to_text().contains("witness"));
    }
}
