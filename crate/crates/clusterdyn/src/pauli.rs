//! Sparse Pauli-string algebra and lattice/stabilizer bookkeeping.
//!
//! A [`PauliString`] is a phase (`±1`, `±i`) together with a site-sorted map
//! of single-qubit letters, e.g. `+1 * Z0 X1 Z2`. Products track the phase
//! exactly; commutation is decided by counting anticommuting overlaps. A
//! [`Lattice`] is an undirected simple graph of qubit sites; the cluster
//! stabilizer of site `i` is `K_i = X_i ⊗_{j∼i} Z_j`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense-representation capacity: states above this many qubits are refused.
pub const MAX_QUBITS: usize = 12;

/// A single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PauliOp {
    X,
    Y,
    Z,
}

impl PauliOp {
    /// Product of two letters: `a · b = phase · c` with `c = None` meaning
    /// the identity (equal letters square to 1).
    fn times(self, other: PauliOp) -> (Phase, Option<PauliOp>) {
        use PauliOp::*;
        match (self, other) {
            (a, b) if a == b => (Phase::PlusOne, None),
            // cyclic: XY = iZ, YZ = iX, ZX = iY
            (X, Y) => (Phase::PlusI, Some(Z)),
            (Y, Z) => (Phase::PlusI, Some(X)),
            (Z, X) => (Phase::PlusI, Some(Y)),
            // anticyclic picks up −i
            (Y, X) => (Phase::MinusI, Some(Z)),
            (Z, Y) => (Phase::MinusI, Some(X)),
            (X, Z) => (Phase::MinusI, Some(Y)),
            _ => unreachable!(),
        }
    }
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PauliOp::X => write!(f, "X"),
            PauliOp::Y => write!(f, "Y"),
            PauliOp::Z => write!(f, "Z"),
        }
    }
}

/// Fourth root of unity carried by a Pauli string: `i^k` for `k = 0..3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    PlusOne,
    PlusI,
    MinusOne,
    MinusI,
}

impl Phase {
    fn from_power(k: u8) -> Phase {
        match k % 4 {
            0 => Phase::PlusOne,
            1 => Phase::PlusI,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    fn power(self) -> u8 {
        match self {
            Phase::PlusOne => 0,
            Phase::PlusI => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    /// Group product (powers of i add mod 4).
    pub fn times(self, other: Phase) -> Phase {
        Phase::from_power(self.power() + other.power())
    }

    /// Complex value of the phase.
    pub fn value(self) -> Complex64 {
        match self {
            Phase::PlusOne => Complex64::new(1.0, 0.0),
            Phase::PlusI => Complex64::new(0.0, 1.0),
            Phase::MinusOne => Complex64::new(-1.0, 0.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }

    /// True for `±1` (the string is Hermitian when its phase is real).
    pub fn is_real(self) -> bool {
        matches!(self, Phase::PlusOne | Phase::MinusOne)
    }

    pub fn negated(self) -> Phase {
        Phase::from_power(self.power() + 2)
    }

    /// Complex conjugate (`±i ↦ ∓i`).
    pub fn conjugated(self) -> Phase {
        match self {
            Phase::PlusI => Phase::MinusI,
            Phase::MinusI => Phase::PlusI,
            other => other,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::PlusOne => write!(f, "+1"),
            Phase::PlusI => write!(f, "+i"),
            Phase::MinusOne => write!(f, "-1"),
            Phase::MinusI => write!(f, "-i"),
        }
    }
}

/// A phased product of single-qubit Pauli operators on named sites.
///
/// The text form is `"<phase> * <letter><site> ..."` with sites ascending,
/// e.g. `+1 * Z0 X1 Z2`; the identity prints as `+1 * I`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PauliString {
    phase: Phase,
    ops: BTreeMap<usize, PauliOp>,
}

impl PauliString {
    /// The identity operator (empty support, phase `+1`).
    pub fn identity() -> Self {
        PauliString { phase: Phase::PlusOne, ops: BTreeMap::new() }
    }

    /// A single letter on one site, phase `+1`.
    pub fn single(site: usize, op: PauliOp) -> Self {
        let mut ops = BTreeMap::new();
        ops.insert(site, op);
        PauliString { phase: Phase::PlusOne, ops }
    }

    /// Build from a phase and `(site, letter)` pairs. Repeated sites multiply.
    pub fn from_ops<I>(phase: Phase, ops: I) -> Self
    where
        I: IntoIterator<Item = (usize, PauliOp)>,
    {
        let mut out = PauliString { phase, ops: BTreeMap::new() };
        for (site, op) in ops {
            out = out.multiply(&PauliString::single(site, op));
        }
        out
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Same letters with the given phase.
    pub fn with_phase(&self, phase: Phase) -> Self {
        PauliString { phase, ops: self.ops.clone() }
    }

    /// Number of sites acted on non-trivially.
    pub fn weight(&self) -> usize {
        self.ops.len()
    }

    pub fn is_identity_letters(&self) -> bool {
        self.ops.is_empty()
    }

    /// Sites acted on, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.ops.keys().copied()
    }

    pub fn op_at(&self, site: usize) -> Option<PauliOp> {
        self.ops.get(&site).copied()
    }

    /// Iterate `(site, letter)` in ascending site order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, PauliOp)> + '_ {
        self.ops.iter().map(|(&s, &op)| (s, op))
    }

    /// Largest site index acted on, if any.
    pub fn max_site(&self) -> Option<usize> {
        self.ops.keys().next_back().copied()
    }

    /// Operator product `self · other` with exact phase accumulation.
    ///
    /// `X0 · Y0 = +i Z0`; `(X0 Z1) · (Z0 Z1) = −i Y0`.
    pub fn multiply(&self, other: &PauliString) -> PauliString {
        let mut phase = self.phase.times(other.phase);
        let mut ops = self.ops.clone();
        for (&site, &b) in &other.ops {
            match ops.remove(&site) {
                None => {
                    ops.insert(site, b);
                }
                Some(a) => {
                    let (ph, prod) = a.times(b);
                    phase = phase.times(ph);
                    if let Some(c) = prod {
                        ops.insert(site, c);
                    }
                }
            }
        }
        PauliString { phase, ops }
    }

    /// Hermitian adjoint: conjugates the phase, letters are self-adjoint.
    pub fn adjoint(&self) -> PauliString {
        PauliString { phase: self.phase.conjugated(), ops: self.ops.clone() }
    }

    /// Whether the two strings commute as operators.
    ///
    /// Two Pauli strings anticommute iff the number of sites where both act
    /// with *different* letters is odd; the phases are irrelevant.
    pub fn commutes(&self, other: &PauliString) -> bool {
        let mut clashes = 0usize;
        for (&site, &a) in &self.ops {
            if let Some(&b) = other.ops.get(&site) {
                if a != b {
                    clashes += 1;
                }
            }
        }
        clashes % 2 == 0
    }

    /// Split into `(phase value, canonical observable with phase +1)`.
    pub fn canonical(&self) -> (Complex64, PauliString) {
        (self.phase.value(), self.with_phase(Phase::PlusOne))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} *", self.phase)?;
        if self.ops.is_empty() {
            return write!(f, " I");
        }
        for (&site, &op) in &self.ops {
            write!(f, " {op}{site}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parse the display form. The phase prefix (`+1 * `) may be omitted;
    /// `I` denotes the identity.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, rest) = match s.split_once('*') {
            Some((ph, rest)) => {
                let phase = match ph.trim() {
                    "+1" | "1" => Phase::PlusOne,
                    "-1" => Phase::MinusOne,
                    "+i" | "i" => Phase::PlusI,
                    "-i" => Phase::MinusI,
                    other => return Err(Error::Parse(format!("unknown phase {other:?}"))),
                };
                (phase, rest)
            }
            None => (Phase::PlusOne, s),
        };
        let mut ops = BTreeMap::new();
        for token in rest.split_whitespace() {
            if token == "I" {
                continue;
            }
            let (letter, site) = token.split_at(1);
            let op = match letter {
                "X" | "x" => PauliOp::X,
                "Y" | "y" => PauliOp::Y,
                "Z" | "z" => PauliOp::Z,
                other => return Err(Error::Parse(format!("unknown Pauli letter {other:?}"))),
            };
            let site: usize = site
                .parse()
                .map_err(|_| Error::Parse(format!("bad site index in token {token:?}")))?;
            if ops.insert(site, op).is_some() {
                return Err(Error::Parse(format!("site {site} appears twice")));
            }
        }
        Ok(PauliString { phase, ops })
    }
}

/// Shape tag for the built-in lattice constructors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Line,
    Square,
    Cubic,
    Custom,
}

/// An undirected simple graph of qubit sites `0..n_sites`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    kind: LatticeKind,
    n_sites: usize,
    /// Normalized edges `(a, b)` with `a < b`.
    edges: BTreeSet<(usize, usize)>,
}

impl Lattice {
    /// Open 1-D chain of `n ≥ 1` sites.
    pub fn line(n: usize) -> Result<Lattice> {
        if n == 0 {
            return Err(Error::InvalidParameter("a lattice needs at least one site".into()));
        }
        let edges = (1..n).map(|i| (i - 1, i)).collect();
        Ok(Lattice { kind: LatticeKind::Line, n_sites: n, edges })
    }

    /// Open `nx × ny` square grid; site `(x, y)` has index `y·nx + x`.
    pub fn square(nx: usize, ny: usize) -> Result<Lattice> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter("a lattice needs at least one site".into()));
        }
        let mut edges = BTreeSet::new();
        for y in 0..ny {
            for x in 0..nx {
                let s = y * nx + x;
                if x + 1 < nx {
                    edges.insert((s, s + 1));
                }
                if y + 1 < ny {
                    edges.insert((s, s + nx));
                }
            }
        }
        Ok(Lattice { kind: LatticeKind::Square, n_sites: nx * ny, edges })
    }

    /// Open `nx × ny × nz` cubic grid; site `(x, y, z)` has index
    /// `z·nx·ny + y·nx + x`.
    pub fn cubic(nx: usize, ny: usize, nz: usize) -> Result<Lattice> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidParameter("a lattice needs at least one site".into()));
        }
        let mut edges = BTreeSet::new();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let s = z * nx * ny + y * nx + x;
                    if x + 1 < nx {
                        edges.insert((s, s + 1));
                    }
                    if y + 1 < ny {
                        edges.insert((s, s + nx));
                    }
                    if z + 1 < nz {
                        edges.insert((s, s + nx * ny));
                    }
                }
            }
        }
        Ok(Lattice { kind: LatticeKind::Cubic, n_sites: nx * ny * nz, edges })
    }

    /// Arbitrary graph on `n_sites` sites from an edge list.
    pub fn custom<I>(n_sites: usize, edges: I) -> Result<Lattice>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n_sites == 0 {
            return Err(Error::InvalidParameter("a lattice needs at least one site".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            for s in [a, b] {
                if s >= n_sites {
                    return Err(Error::SiteOutOfRange { site: s, n_sites });
                }
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Lattice { kind: LatticeKind::Custom, n_sites, edges: set })
    }

    /// Parse the edge-list text format: one `"i j"` pair per line; blank
    /// lines and `#` comments ignored; the site count is `max index + 1`.
    pub fn parse_edge_list(text: &str) -> Result<Lattice> {
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.ok_or_else(|| Error::Parse(format!("line {}: expected \"i j\"", lineno + 1)))?
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad site index", lineno + 1)))
            };
            let a = parse(it.next())?;
            let b = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::Parse(format!("line {}: trailing tokens", lineno + 1)));
            }
            edges.push((a, b));
        }
        let n_sites = edges
            .iter()
            .map(|&(a, b)| a.max(b) + 1)
            .max()
            .ok_or_else(|| Error::Parse("edge list is empty".into()))?;
        Lattice::custom(n_sites, edges)
    }

    /// Serialize to the edge-list text format.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(a, b) in &self.edges {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites {
            return Err(Error::SiteOutOfRange { site, n_sites: self.n_sites });
        }
        Ok(())
    }

    /// Neighbours of `site`, ascending.
    pub fn neighbors(&self, site: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == site {
                    Some(b)
                } else if b == site {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn degree(&self, site: usize) -> usize {
        self.neighbors(site).len()
    }

    /// Cluster stabilizer `K_i = X_i ⊗_{j∼i} Z_j` (phase `+1`).
    pub fn stabilizer(&self, site: usize) -> Result<PauliString> {
        self.check_site(site)?;
        let mut ops = vec![(site, PauliOp::X)];
        for j in self.neighbors(site) {
            ops.push((j, PauliOp::Z));
        }
        Ok(PauliString::from_ops(Phase::PlusOne, ops))
    }

    /// All stabilizers, site-ascending.
    pub fn stabilizers(&self) -> Vec<PauliString> {
        (0..self.n_sites).map(|i| self.stabilizer(i).expect("site in range")).collect()
    }

    /// Whether the graph is connected (single-site lattices are).
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_sites];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            for j in self.neighbors(s) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|v| v)
    }
}
