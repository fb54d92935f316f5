//! Finite partitions of the state domain into origin, sign/support patterns
//! and one complement region, together with builders for structured system
//! classes and a validator for region-constant transitions.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pattern::{domain_cells, image_stays_in_box, Cell, CoordSign};
use crate::system::{OrthantSign, StateDomain, SwitchedSystem, EPS_ZERO};

/// Half-width of the sampling box used by the sampled validators.
pub const SAMPLE_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SignConstraint {
    Pos,
    Neg,
    Any,
}

impl SignConstraint {
    fn admits(self, s: CoordSign) -> bool {
        match self {
            SignConstraint::Pos => s == CoordSign::Pos,
            SignConstraint::Neg => s == CoordSign::Neg,
            SignConstraint::Any => s != CoordSign::Zero,
        }
    }

    fn options(self) -> &'static [CoordSign] {
        match self {
            SignConstraint::Pos => &[CoordSign::Pos],
            SignConstraint::Neg => &[CoordSign::Neg],
            SignConstraint::Any => &[CoordSign::Pos, CoordSign::Neg],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionKind {
    Origin,
    /// Exactly the coordinates in `free` are nonzero, with the given signs.
    Pattern {
        free: Vec<usize>,
        signs: Vec<SignConstraint>,
    },
    /// Everything in the domain not covered by another region.
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: usize,
    pub kind: RegionKind,
}

impl Region {
    pub fn pattern(id: usize, free: Vec<usize>, signs: Vec<SignConstraint>) -> Self {
        Region {
            id,
            kind: RegionKind::Pattern { free, signs },
        }
    }

    pub fn free_coords(&self) -> &[usize] {
        match &self.kind {
            RegionKind::Pattern { free, .. } => free,
            _ => &[],
        }
    }

    pub fn is_origin(&self) -> bool {
        self.kind == RegionKind::Origin
    }

    pub fn is_other(&self) -> bool {
        self.kind == RegionKind::Other
    }

    fn matches(&self, cell: &Cell) -> bool {
        match &self.kind {
            RegionKind::Origin => cell.is_zero(),
            RegionKind::Pattern { free, signs } => cell.0.iter().enumerate().all(|(k, s)| {
                match free.iter().position(|f| *f == k) {
                    Some(pos) => signs[pos].admits(*s),
                    None => *s == CoordSign::Zero,
                }
            }),
            RegionKind::Other => false,
        }
    }
}

/// How an abstraction was produced; graph construction uses it to decide
/// where feedback transitions are searched for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbstractionFamily {
    Support,
    Lattice,
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Abstraction {
    dim: usize,
    domain: StateDomain,
    regions: Vec<Region>,
    family: AbstractionFamily,
}

impl Abstraction {
    pub fn new(
        dim: usize,
        domain: StateDomain,
        regions: Vec<Region>,
        family: AbstractionFamily,
    ) -> Result<Self> {
        domain.validate(dim)?;
        match regions.first() {
            Some(r) if r.is_origin() => {}
            _ => {
                return Err(Error::InvalidAbstraction(
                    "region 0 must be the origin".into(),
                ))
            }
        }
        let mut others = 0;
        for (pos, r) in regions.iter().enumerate() {
            if r.id != pos {
                return Err(Error::InvalidAbstraction(format!(
                    "region at position {pos} has id {}",
                    r.id
                )));
            }
            match &r.kind {
                RegionKind::Origin if pos != 0 => {
                    return Err(Error::InvalidAbstraction(format!(
                        "region {pos} duplicates the origin"
                    )))
                }
                RegionKind::Other => others += 1,
                RegionKind::Pattern { free, signs } => {
                    let sorted: BTreeSet<_> = free.iter().collect();
                    if free.is_empty()
                        || sorted.len() != free.len()
                        || free.windows(2).any(|w| w[0] > w[1])
                        || free.iter().any(|k| *k >= dim)
                        || signs.len() != free.len()
                    {
                        return Err(Error::InvalidAbstraction(format!(
                            "region {pos} has a malformed pattern"
                        )));
                    }
                }
                RegionKind::Origin => {}
            }
        }
        if others > 1 {
            return Err(Error::InvalidAbstraction(
                "at most one complement region is allowed".into(),
            ));
        }
        Ok(Self {
            dim,
            domain,
            regions,
            family,
        })
    }

    pub const ORIGIN: usize = 0;

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &StateDomain {
        &self.domain
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, id: usize) -> &Region {
        &self.regions[id]
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn family(&self) -> AbstractionFamily {
        self.family
    }

    pub fn other_id(&self) -> Option<usize> {
        self.regions.iter().position(|r| r.is_other())
    }

    /// Region containing every point of `cell`; `Ok(None)` when the cell
    /// lies outside the domain.
    pub fn region_of_cell(&self, cell: &Cell) -> Result<Option<usize>> {
        if !cell.in_domain(&self.domain) {
            return Ok(None);
        }
        let hits: Vec<usize> = self
            .regions
            .iter()
            .filter(|r| r.matches(cell))
            .map(|r| r.id)
            .collect();
        match hits.len() {
            0 => match self.other_id() {
                Some(o) => Ok(Some(o)),
                None => Err(Error::UnclassifiedState {
                    state: cell.representative(&self.domain, 1.0).as_slice().to_vec(),
                }),
            },
            1 => Ok(Some(hits[0])),
            _ => Err(Error::AmbiguousRegion {
                state: cell.representative(&self.domain, 1.0).as_slice().to_vec(),
                regions: hits,
            }),
        }
    }

    /// Region id of `x`. Coordinates with `|x_i| <= eps` count as zero.
    pub fn classify(&self, x: &DVector<f64>, eps: f64) -> Result<usize> {
        if x.len() != self.dim || !self.domain.contains(x, eps) {
            return Err(Error::StateOutsideDomain {
                state: x.as_slice().to_vec(),
            });
        }
        let cell = Cell::of(x, eps);
        match self.region_of_cell(&cell) {
            Ok(Some(id)) => Ok(id),
            Ok(None) => Err(Error::StateOutsideDomain {
                state: x.as_slice().to_vec(),
            }),
            Err(Error::AmbiguousRegion { regions, .. }) => Err(Error::AmbiguousRegion {
                state: x.as_slice().to_vec(),
                regions,
            }),
            Err(Error::UnclassifiedState { .. }) => Err(Error::UnclassifiedState {
                state: x.as_slice().to_vec(),
            }),
            Err(e) => Err(e),
        }
    }

    /// The nonempty cells making up region `id`.
    pub fn cells_of(&self, id: usize) -> Result<Vec<Cell>> {
        match &self.regions[id].kind {
            RegionKind::Origin => Ok(vec![Cell(vec![CoordSign::Zero; self.dim])]),
            RegionKind::Pattern { free, signs } => {
                let mut out = vec![Cell(vec![CoordSign::Zero; self.dim])];
                for (k, sc) in free.iter().zip(signs) {
                    let opts: Vec<CoordSign> = sc
                        .options()
                        .iter()
                        .copied()
                        .filter(|s| self.domain.allows(*k, *s))
                        .collect();
                    out = out
                        .into_iter()
                        .flat_map(|c| {
                            opts.iter().map(move |s| {
                                let mut c = c.clone();
                                c.0[*k] = *s;
                                c
                            })
                        })
                        .collect();
                }
                Ok(out)
            }
            RegionKind::Other => {
                let mut out = Vec::new();
                for cell in domain_cells(self.dim, &self.domain)? {
                    if !self.regions.iter().any(|r| r.matches(&cell)) {
                        out.push(cell);
                    }
                }
                Ok(out)
            }
        }
    }
}

fn domain_sign(domain: &StateDomain, k: usize) -> SignConstraint {
    match domain {
        StateDomain::Orthant { signs } => match signs[k] {
            OrthantSign::NonNegative => SignConstraint::Pos,
            OrthantSign::NonPositive => SignConstraint::Neg,
        },
        _ => SignConstraint::Any,
    }
}

/// Origin, the `d` coordinate axes, and the complement (dropped for `d = 1`).
pub fn build_support_abstraction(system: &SwitchedSystem) -> Abstraction {
    let d = system.dim();
    let domain = system.domain().clone();
    let mut regions = vec![Region {
        id: 0,
        kind: RegionKind::Origin,
    }];
    for k in 0..d {
        regions.push(Region::pattern(k + 1, vec![k], vec![domain_sign(&domain, k)]));
    }
    if d > 1 {
        regions.push(Region {
            id: d + 1,
            kind: RegionKind::Other,
        });
    }
    Abstraction::new(d, domain, regions, AbstractionFamily::Support)
        .expect("support abstraction is well formed")
}

/// One region per exact support set, ordered by cardinality and then
/// lexicographically. Requires diagonal nonsingular `A_i` and `b_i` along a
/// single axis.
pub fn build_support_lattice(system: &SwitchedSystem) -> Result<Abstraction> {
    for (i, s) in system.subsystems().iter().enumerate() {
        if !s.is_diagonal_nonsingular() {
            return Err(Error::UnsupportedStructure(format!(
                "A_{} is not diagonal with nonzero diagonal",
                i + 1
            )));
        }
        if s.input_axis().is_none() {
            return Err(Error::UnsupportedStructure(format!(
                "b_{} is not a scaled standard basis vector",
                i + 1
            )));
        }
    }
    let d = system.dim();
    if d > crate::pattern::MAX_CELL_DIM {
        return Err(Error::DimensionTooLarge {
            dim: d,
            limit: crate::pattern::MAX_CELL_DIM,
        });
    }
    let domain = system.domain().clone();
    let mut supports: Vec<Vec<usize>> = (1u32..(1u32 << d))
        .map(|mask| (0..d).filter(|k| mask & (1 << k) != 0).collect())
        .collect();
    supports.sort_by(|a: &Vec<usize>, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let mut regions = vec![Region {
        id: 0,
        kind: RegionKind::Origin,
    }];
    for (n, free) in supports.into_iter().enumerate() {
        let signs = free.iter().map(|k| domain_sign(&domain, *k)).collect();
        regions.push(Region::pattern(n + 1, free, signs));
    }
    Abstraction::new(d, domain, regions, AbstractionFamily::Lattice)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ValidStructural,
    ValidSampled,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// A state belongs to more than one region.
    Overlap,
    /// A domain state belongs to no region.
    Uncovered,
    /// Two states of one region reach different regions under `mu = 0`.
    NonConstantTarget,
    /// Some state of the region leaves the domain under `mu = 0`.
    LeavesDomain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub state: Vec<f64>,
    /// Image under the subsystem with `mu = 0` (empty for partition checks).
    pub image: Vec<f64>,
    /// Region of the image, `None` when it leaves the domain.
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub region: usize,
    pub subsystem: Option<usize>,
    pub witnesses: Vec<Witness>,
    /// Distinct target regions observed (matching regions for overlaps).
    pub observed: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
    pub structural_pairs: usize,
    pub sampled_pairs: usize,
}

/// Checks disjointness and coverage from the region definitions, then the
/// `mu = 0` region-constancy of every (region, subsystem) pair: exactly when
/// the sign pattern of each cell is carried to a single cell, otherwise by
/// sampling `n_samples` states plus deterministic probes.
pub fn validate_abstraction(
    system: &SwitchedSystem,
    abs: &Abstraction,
    n_samples: usize,
    seed: u64,
) -> Result<ValidationReport> {
    let mut violations = check_partition(abs)?;
    let mut structural_pairs = 0;
    let mut sampled_pairs = 0;
    if violations.is_empty() {
        for region in abs.regions().iter().filter(|r| !r.is_origin()) {
            let cells = abs.cells_of(region.id)?;
            if cells.is_empty() {
                structural_pairs += system.n_subsystems();
                continue;
            }
            for (i, sub) in system.subsystems().iter().enumerate() {
                match structural_check(abs, &sub.a, region.id, i, &cells)? {
                    Some(found) => {
                        structural_pairs += 1;
                        violations.extend(found);
                    }
                    None => {
                        sampled_pairs += 1;
                        let mut rng = ChaCha8Rng::seed_from_u64(task_seed(seed, region.id, i));
                        let points = sample_points(abs, &sub.a, &cells, n_samples, &mut rng);
                        violations.extend(sampled_check(abs, &sub.a, region.id, i, &points));
                    }
                }
            }
        }
    }
    let verdict = if !violations.is_empty() {
        Verdict::Invalid
    } else if sampled_pairs == 0 {
        Verdict::ValidStructural
    } else {
        Verdict::ValidSampled
    };
    Ok(ValidationReport {
        verdict,
        violations,
        structural_pairs,
        sampled_pairs,
    })
}

fn check_partition(abs: &Abstraction) -> Result<Vec<Violation>> {
    let mut out = Vec::new();
    for cell in domain_cells(abs.dim(), abs.domain())? {
        let hits: Vec<usize> = abs
            .regions()
            .iter()
            .filter(|r| r.matches(&cell))
            .map(|r| r.id)
            .collect();
        let witness = Witness {
            state: cell.representative(abs.domain(), 1.0).as_slice().to_vec(),
            image: Vec::new(),
            target: None,
        };
        if hits.len() > 1 {
            out.push(Violation {
                kind: ViolationKind::Overlap,
                region: hits[0],
                subsystem: None,
                witnesses: vec![witness],
                observed: hits.into_iter().map(Some).collect(),
            });
        } else if hits.is_empty() && abs.other_id().is_none() {
            out.push(Violation {
                kind: ViolationKind::Uncovered,
                region: 0,
                subsystem: None,
                witnesses: vec![witness],
                observed: Vec::new(),
            });
        }
    }
    Ok(out)
}

/// `Some(violations)` when every cell maps to a single cell, `None` when
/// some row can cancel and sampling is needed.
fn structural_check(
    abs: &Abstraction,
    a: &DMatrix<f64>,
    region: usize,
    subsystem: usize,
    cells: &[Cell],
) -> Result<Option<Vec<Violation>>> {
    let mut targets = Vec::with_capacity(cells.len());
    for cell in cells {
        let Some(img) = cell.image(a) else {
            return Ok(None);
        };
        targets.push((cell, img));
    }
    let domain = abs.domain();
    let mut seen: Vec<(Option<usize>, Witness)> = Vec::new();
    for (cell, img) in targets {
        let (state, target) = if !img.in_domain(domain) {
            (cell.representative(domain, 1.0), None)
        } else if !image_stays_in_box(a, cell, domain, EPS_ZERO) {
            let bad = cell
                .box_vertices(domain)
                .unwrap_or_default()
                .into_iter()
                .find(|v| !domain.contains(&(a * v), EPS_ZERO))
                .expect("a vertex leaves the box");
            (bad, None)
        } else {
            (cell.representative(domain, 1.0), abs.region_of_cell(&img)?)
        };
        if !seen.iter().any(|(t, _)| *t == target) {
            let image = a * &state;
            seen.push((
                target,
                Witness {
                    state: state.as_slice().to_vec(),
                    image: image.as_slice().to_vec(),
                    target,
                },
            ));
        }
    }
    Ok(Some(violation_from(region, subsystem, seen).into_iter().collect()))
}

fn violation_from(
    region: usize,
    subsystem: usize,
    seen: Vec<(Option<usize>, Witness)>,
) -> Option<Violation> {
    let leaves = seen.iter().any(|(t, _)| t.is_none());
    if seen.len() <= 1 && !leaves {
        return None;
    }
    let kind = if leaves {
        ViolationKind::LeavesDomain
    } else {
        ViolationKind::NonConstantTarget
    };
    let observed = seen.iter().map(|(t, _)| *t).collect();
    Some(Violation {
        kind,
        region,
        subsystem: Some(subsystem),
        witnesses: seen.into_iter().map(|(_, w)| w).collect(),
        observed,
    })
}

fn sampled_check(
    abs: &Abstraction,
    a: &DMatrix<f64>,
    region: usize,
    subsystem: usize,
    points: &[DVector<f64>],
) -> Option<Violation> {
    let mut seen: Vec<(Option<usize>, Witness)> = Vec::new();
    for x in points {
        let y = a * x;
        let target = abs.classify(&y, EPS_ZERO).ok();
        if !seen.iter().any(|(t, _)| *t == target) {
            seen.push((
                target,
                Witness {
                    state: x.as_slice().to_vec(),
                    image: y.as_slice().to_vec(),
                    target,
                },
            ));
        }
    }
    violation_from(region, subsystem, seen)
}

fn task_seed(seed: u64, region: usize, subsystem: usize) -> u64 {
    // splitmix-style mixing so that tasks draw independent streams
    let mut z = seed
        .wrapping_add((region as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((subsystem as u64 + 1).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw from a region restricted to `[-SAMPLE_RADIUS, SAMPLE_RADIUS]^d`.
pub(crate) fn sample_in_cells(
    domain: &StateDomain,
    cells: &[Cell],
    rng: &mut impl Rng,
) -> DVector<f64> {
    let cell = &cells[rng.gen_range(0..cells.len())];
    DVector::from_iterator(
        cell.dim(),
        cell.0.iter().enumerate().map(|(k, s)| {
            let (lo, hi) = domain.coord_range(k, *s);
            let u: f64 = rng.gen_range(0.0..1.0);
            match s {
                CoordSign::Zero => 0.0,
                CoordSign::Pos => hi.min(SAMPLE_RADIUS) * (1.0 - u),
                CoordSign::Neg => lo.max(-SAMPLE_RADIUS) * (1.0 - u),
            }
        }),
    )
}

/// Deterministic probes (unit and extreme corners of every cell), then
/// row-cancellation probes for cells whose image sign is undetermined, then
/// `n_samples` uniform draws.
pub(crate) fn sample_points(
    abs: &Abstraction,
    a: &DMatrix<f64>,
    cells: &[Cell],
    n_samples: usize,
    rng: &mut impl Rng,
) -> Vec<DVector<f64>> {
    let domain = abs.domain();
    let mut points = Vec::new();
    for cell in cells {
        points.push(cell.representative(domain, 1.0));
        points.push(cell.representative(domain, SAMPLE_RADIUS));
    }
    for cell in cells.iter().filter(|c| c.image(a).is_none()) {
        let base = cell.representative(domain, 1.0);
        points.extend(cancellation_probes(a, cell, &base, domain));
    }
    for _ in 0..n_samples {
        points.push(sample_in_cells(domain, cells, rng));
    }
    points
}

/// Points of `cell` at which some mixed-sign row of `a` vanishes.
fn cancellation_probes(
    a: &DMatrix<f64>,
    cell: &Cell,
    base: &DVector<f64>,
    domain: &StateDomain,
) -> Vec<DVector<f64>> {
    let support = cell.support();
    let mut out = Vec::new();
    for p in 0..a.nrows() {
        let terms: Vec<(usize, f64)> = support
            .iter()
            .map(|&q| (q, a[(p, q)] * base[q]))
            .filter(|(_, t)| *t != 0.0)
            .collect();
        let has_pos = terms.iter().any(|(_, t)| *t > 0.0);
        let has_neg = terms.iter().any(|(_, t)| *t < 0.0);
        if !(has_pos && has_neg) {
            continue;
        }
        let sum: f64 = terms.iter().map(|(_, t)| t).sum();
        // rescale a term opposing the rest so that the row sums to zero
        let Some(&(q, t_q)) = terms
            .iter()
            .find(|(_, t)| if sum >= 0.0 { *t < 0.0 } else { *t > 0.0 })
        else {
            continue;
        };
        let mut x = base.clone();
        x[q] = -(sum - t_q) / a[(p, q)];
        if CoordSign::of(x[q], 0.0) != cell.0[q] {
            continue;
        }
        if let StateDomain::Box { lower, upper } = domain {
            let mut scale: f64 = 1.0;
            for k in 0..x.len() {
                if x[k] > upper[k] {
                    scale = scale.min(upper[k] / x[k]);
                } else if x[k] < lower[k] {
                    scale = scale.min(lower[k] / x[k]);
                }
            }
            x *= scale;
        }
        out.push(x);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::system::{ControlSet, SubsystemDynamics};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn classify_example_one() {
        let sys = fixtures::example1_system();
        let abs = build_support_abstraction(&sys);
        assert_eq!(abs.classify(&dv(&[0.0, 10.0]), EPS_ZERO).unwrap(), 2);
        assert_eq!(abs.classify(&dv(&[0.0, 0.0]), EPS_ZERO).unwrap(), 0);
        assert_eq!(abs.classify(&dv(&[3.0, 4.0]), EPS_ZERO).unwrap(), 3);
        assert_eq!(abs.classify(&dv(&[1e-12, -4.0]), EPS_ZERO).unwrap(), 2);
        assert!(matches!(
            abs.classify(&dv(&[11.0, 0.0]), EPS_ZERO),
            Err(Error::StateOutsideDomain { .. })
        ));
    }

    #[test]
    fn classify_rejects_orthant_violations() {
        let sys = fixtures::example2_system();
        let abs = build_support_abstraction(&sys);
        assert_eq!(abs.classify(&dv(&[1.0, 2.0]), EPS_ZERO).unwrap(), 3);
        assert!(abs.classify(&dv(&[-1.0, 2.0]), EPS_ZERO).is_err());
    }

    #[test]
    fn ambiguous_abstraction_is_reported() {
        let regions = vec![
            Region { id: 0, kind: RegionKind::Origin },
            Region::pattern(1, vec![0], vec![SignConstraint::Any]),
            Region::pattern(2, vec![0], vec![SignConstraint::Pos]),
        ];
        let abs = Abstraction::new(1, StateDomain::All, regions, AbstractionFamily::Explicit).unwrap();
        assert!(matches!(
            abs.classify(&dv(&[1.0]), EPS_ZERO),
            Err(Error::AmbiguousRegion { .. })
        ));
    }

    #[test]
    fn support_abstraction_sizes() {
        assert_eq!(build_support_abstraction(&fixtures::example1_system()).len(), 4);
        assert_eq!(build_support_abstraction(&fixtures::scalar_system()).len(), 2);
        let sys3 = fixtures::prop1_system(&[1.0, 2.0, -0.5], 3);
        assert_eq!(build_support_abstraction(&sys3).len(), 5);
    }

    #[test]
    fn lattice_sizes_and_preconditions() {
        let sys2 = fixtures::prop1_system(&[1.0, 2.0], 2);
        let lat = build_support_lattice(&sys2).unwrap();
        assert_eq!(lat.len(), 4);
        assert_eq!(lat.region(3).free_coords(), &[0, 1]);
        let sys3 = fixtures::prop1_system(&[1.0, 2.0, -0.5], 3);
        assert_eq!(build_support_lattice(&sys3).unwrap().len(), 8);
        assert!(matches!(
            build_support_lattice(&fixtures::example1_system()),
            Err(Error::UnsupportedStructure(_))
        ));
    }

    #[test]
    fn partition_is_exhaustive_and_disjoint() {
        for sys in [fixtures::example1_system(), fixtures::example2_system()] {
            let abs = build_support_abstraction(&sys);
            assert!(check_partition(&abs).unwrap().is_empty());
        }
        let uncovered = Abstraction::new(
            2,
            StateDomain::All,
            vec![
                Region { id: 0, kind: RegionKind::Origin },
                Region::pattern(1, vec![0], vec![SignConstraint::Any]),
            ],
            AbstractionFamily::Explicit,
        )
        .unwrap();
        let v = check_partition(&uncovered).unwrap();
        assert!(v.iter().all(|v| v.kind == ViolationKind::Uncovered));
        assert!(!v.is_empty());
    }

    #[test]
    fn examples_validate_structurally() {
        for sys in [fixtures::example1_system(), fixtures::example2_system()] {
            let abs = build_support_abstraction(&sys);
            let rep = validate_abstraction(&sys, &abs, 50, 7).unwrap();
            assert_eq!(rep.verdict, Verdict::ValidStructural, "{rep:?}");
        }
    }

    #[test]
    fn shear_is_rejected_with_witnesses() {
        let s = SubsystemDynamics::from_rows(2, &[1.0, 1.0, 0.0, 1.0], &[1.0, 0.0]).unwrap();
        let sys = SwitchedSystem::new(vec![s], [(0, 0)], ControlSet::reals(), StateDomain::All).unwrap();
        let abs = build_support_abstraction(&sys);
        let rep = validate_abstraction(&sys, &abs, 200, 1).unwrap();
        assert_eq!(rep.verdict, Verdict::Invalid);
        let v = &rep.violations[0];
        assert_eq!(v.region, 3);
        assert_eq!(v.kind, ViolationKind::NonConstantTarget);
        assert!(v.observed.contains(&Some(2)) && v.observed.contains(&Some(3)));
        let to_axis = v.witnesses.iter().find(|w| w.target == Some(2)).unwrap();
        assert_eq!(to_axis.state[0], -to_axis.state[1]);
        assert_eq!(to_axis.image, vec![0.0, to_axis.state[1]]);
    }

    #[test]
    fn box_exit_is_a_violation() {
        let s = SubsystemDynamics::from_rows(1, &[2.0], &[1.0]).unwrap();
        let sys = SwitchedSystem::new(
            vec![s],
            [(0, 0)],
            ControlSet::reals(),
            StateDomain::Box { lower: vec![-1.0], upper: vec![1.0] },
        )
        .unwrap();
        let abs = build_support_abstraction(&sys);
        let rep = validate_abstraction(&sys, &abs, 10, 0).unwrap();
        assert_eq!(rep.verdict, Verdict::Invalid);
        assert_eq!(rep.violations[0].kind, ViolationKind::LeavesDomain);
    }

    #[test]
    fn sampled_reports_are_seed_deterministic() {
        let s = SubsystemDynamics::from_rows(2, &[1.0, 0.5, 0.0, 1.0], &[1.0, 0.0]).unwrap();
        let sys = SwitchedSystem::new(vec![s], [(0, 0)], ControlSet::reals(), StateDomain::All).unwrap();
        let abs = build_support_abstraction(&sys);
        let a = validate_abstraction(&sys, &abs, 100, 42).unwrap();
        let b = validate_abstraction(&sys, &abs, 100, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cancellation_probe_hits_the_axis() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.7, 0.0, 1.0]);
        let cell = Cell(vec![CoordSign::Pos, CoordSign::Neg]);
        let base = cell.representative(&StateDomain::All, 1.0);
        let probes = cancellation_probes(&a, &cell, &base, &StateDomain::All);
        assert_eq!(probes.len(), 1);
        let y = &a * &probes[0];
        assert!(y[0].abs() < 1e-12);
        assert_eq!(Cell::of(&probes[0], 0.0), cell);
    }
}
