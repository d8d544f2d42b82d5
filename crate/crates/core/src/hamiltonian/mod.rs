//! Molecular Hamiltonian ingestion and the Jordan-Wigner qubit mapping.
//!
//! Integrals arrive as FCIDUMP text (chemist convention `(pq|rs)`, 1-based
//! indices, real orbitals). Spin-orbitals are interleaved: qubit `2p` holds
//! the alpha spin of spatial orbital `p` and qubit `2p+1` the beta spin,
//! which keeps pair-hopping generators local to adjacent qubit pairs.

mod pauli;

pub use pauli::{Pauli, PauliString, QubitOperator, COEFF_PRUNE_THRESHOLD};

use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HamiltonianError {
    #[error("fcidump line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("malformed fcidump header: {0}")]
    Header(String),
    #[error("diagonalization dimension {dim} exceeds the dense budget ({max})")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Spatial-orbital one- and two-electron integrals plus the nuclear repulsion
/// offset, i.e. the molecular Hamiltonian input.
///
/// `h1` is symmetric and `h2` carries the full 8-fold permutational symmetry
/// of real orbitals in chemist convention: `(pq|rs) = (qp|rs) = (pq|sr) =
/// (rs|pq)` and their composites.
#[derive(Clone, Debug, PartialEq)]
pub struct FermionIntegrals {
    n_spatial: usize,
    n_alpha: usize,
    n_beta: usize,
    e_nuclear: f64,
    h1: Vec<f64>,
    h2: Vec<f64>,
}

impl FermionIntegrals {
    pub fn new_zero(n_spatial: usize, n_alpha: usize, n_beta: usize) -> Self {
        Self {
            n_spatial,
            n_alpha,
            n_beta,
            e_nuclear: 0.0,
            h1: vec![0.0; n_spatial * n_spatial],
            h2: vec![0.0; n_spatial.pow(4)],
        }
    }

    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.n_spatial
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    pub fn n_electrons(&self) -> usize {
        self.n_alpha + self.n_beta
    }

    pub fn e_nuclear(&self) -> f64 {
        self.e_nuclear
    }

    pub fn set_e_nuclear(&mut self, value: f64) {
        self.e_nuclear = value;
    }

    pub fn h1(&self, p: usize, q: usize) -> f64 {
        self.h1[p * self.n_spatial + q]
    }

    /// Store a one-electron integral into both symmetric slots.
    pub fn set_h1(&mut self, p: usize, q: usize, value: f64) {
        let n = self.n_spatial;
        self.h1[p * n + q] = value;
        self.h1[q * n + p] = value;
    }

    /// Chemist-convention two-electron integral `(pq|rs)`.
    pub fn h2(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let n = self.n_spatial;
        self.h2[((p * n + q) * n + r) * n + s]
    }

    /// Store `(pq|rs)` into all 8 permutationally equivalent slots.
    pub fn set_h2(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        let n = self.n_spatial;
        for (a, b, c, d) in [
            (p, q, r, s),
            (q, p, r, s),
            (p, q, s, r),
            (q, p, s, r),
            (r, s, p, q),
            (s, r, p, q),
            (r, s, q, p),
            (s, r, q, p),
        ] {
            self.h2[((a * n + b) * n + c) * n + d] = value;
        }
    }

    /// Check the symmetry invariants; used by tests and after parsing.
    pub fn validate(&self) -> Result<(), HamiltonianError> {
        let n = self.n_spatial;
        if self.n_alpha > n || self.n_beta > n {
            return Err(HamiltonianError::Invalid(format!(
                "electron counts ({}, {}) exceed {} spatial orbitals",
                self.n_alpha, self.n_beta, n
            )));
        }
        for p in 0..n {
            for q in 0..n {
                if (self.h1(p, q) - self.h1(q, p)).abs() > 1e-12 {
                    return Err(HamiltonianError::Invalid(format!(
                        "h1 not symmetric at ({p}, {q})"
                    )));
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = self.h2(p, q, r, s);
                        if (v - self.h2(q, p, r, s)).abs() > 1e-12
                            || (v - self.h2(p, q, s, r)).abs() > 1e-12
                            || (v - self.h2(r, s, p, q)).abs() > 1e-12
                        {
                            return Err(HamiltonianError::Invalid(format!(
                                "h2 missing 8-fold symmetry at ({p}, {q}, {r}, {s})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn parse_fortran_float(token: &str) -> Option<f64> {
    let normalized = token.replace(['D', 'd'], "E");
    normalized.parse::<f64>().ok()
}

/// Parse FCIDUMP text: a namelist header carrying NORB/NELEC/MS2 followed by
/// `value p q r s` lines. `p q 0 0` is a one-electron integral, `0 0 0 0` the
/// nuclear repulsion, anything else a chemist-convention `(pq|rs)`.
pub fn parse_fcidump(text: &str) -> Result<FermionIntegrals, HamiltonianError> {
    let mut lines = text.lines().enumerate();

    // Header: accumulate until the namelist terminator (&END or a bare /).
    let mut header = String::new();
    let mut body_start = 0usize;
    let mut terminated = false;
    for (idx, line) in lines.by_ref() {
        header.push(' ');
        header.push_str(line);
        if line.contains("&END") || line.contains('/') {
            body_start = idx + 1;
            terminated = true;
            break;
        }
    }
    if !terminated {
        return Err(HamiltonianError::Header(
            "missing namelist terminator (&END or /)".into(),
        ));
    }

    let mut norb: Option<usize> = None;
    let mut nelec: Option<usize> = None;
    let mut ms2: i64 = 0;
    let cleaned = header.replace("&FCI", " ").replace("&END", " ").replace('/', " ");
    for token in cleaned.split([',', ' ', '\t']).filter(|t| !t.is_empty()) {
        if let Some((key, value)) = token.split_once('=') {
            match key.trim().to_ascii_uppercase().as_str() {
                "NORB" => {
                    norb = Some(value.trim().parse().map_err(|_| {
                        HamiltonianError::Header(format!("bad NORB value `{value}`"))
                    })?)
                }
                "NELEC" => {
                    nelec = Some(value.trim().parse().map_err(|_| {
                        HamiltonianError::Header(format!("bad NELEC value `{value}`"))
                    })?)
                }
                "MS2" => {
                    ms2 = value.trim().parse().map_err(|_| {
                        HamiltonianError::Header(format!("bad MS2 value `{value}`"))
                    })?
                }
                _ => {} // ORBSYM, ISYM and friends are accepted and ignored
            }
        }
    }
    let norb = norb.ok_or_else(|| HamiltonianError::Header("NORB missing".into()))?;
    let nelec = nelec.ok_or_else(|| HamiltonianError::Header("NELEC missing".into()))?;
    if norb == 0 {
        return Err(HamiltonianError::Header("NORB must be positive".into()));
    }
    let twice_alpha = nelec as i64 + ms2;
    if twice_alpha < 0 || twice_alpha % 2 != 0 || ms2 > nelec as i64 {
        return Err(HamiltonianError::Header(format!(
            "NELEC={nelec} and MS2={ms2} do not define electron counts"
        )));
    }
    let n_alpha = (twice_alpha / 2) as usize;
    let n_beta = nelec - n_alpha;

    let mut ints = FermionIntegrals::new_zero(norb, n_alpha, n_beta);
    // track what has been set so conflicting duplicates can be reported
    let mut seen_h1 = vec![false; norb * norb];
    let mut seen_h2 = vec![false; norb.pow(4)];
    let mut seen_nuc = false;

    for (idx, line) in lines {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 5 {
            return Err(HamiltonianError::Parse {
                line: line_no,
                msg: format!("expected `value p q r s`, got {} fields", tokens.len()),
            });
        }
        let value = parse_fortran_float(tokens[0]).ok_or_else(|| HamiltonianError::Parse {
            line: line_no,
            msg: format!("bad value `{}`", tokens[0]),
        })?;
        let mut idxs = [0usize; 4];
        for (slot, token) in idxs.iter_mut().zip(&tokens[1..]) {
            *slot = token.parse().map_err(|_| HamiltonianError::Parse {
                line: line_no,
                msg: format!("bad index `{token}`"),
            })?;
        }
        let [p, q, r, s] = idxs;
        let check_range = |i: usize| -> Result<usize, HamiltonianError> {
            if i == 0 || i > norb {
                Err(HamiltonianError::Parse {
                    line: line_no,
                    msg: format!("index {i} out of range 1..={norb}"),
                })
            } else {
                Ok(i - 1)
            }
        };
        let conflict = |old: f64| (old - value).abs() > 1e-10;
        match (p, q, r, s) {
            (0, 0, 0, 0) => {
                if seen_nuc && conflict(ints.e_nuclear) {
                    return Err(HamiltonianError::Parse {
                        line: line_no,
                        msg: "conflicting duplicate nuclear repulsion entry".into(),
                    });
                }
                ints.e_nuclear = value;
                seen_nuc = true;
            }
            (_, _, 0, 0) if p != 0 && q != 0 => {
                let (p, q) = (check_range(p)?, check_range(q)?);
                if seen_h1[p * norb + q] && conflict(ints.h1(p, q)) {
                    return Err(HamiltonianError::Parse {
                        line: line_no,
                        msg: format!("conflicting duplicate h1 entry ({}, {})", p + 1, q + 1),
                    });
                }
                ints.set_h1(p, q, value);
                seen_h1[p * norb + q] = true;
                seen_h1[q * norb + p] = true;
            }
            _ if p != 0 && q != 0 && r != 0 && s != 0 => {
                let (p, q, r, s) = (
                    check_range(p)?,
                    check_range(q)?,
                    check_range(r)?,
                    check_range(s)?,
                );
                let flat = ((p * norb + q) * norb + r) * norb + s;
                if seen_h2[flat] && conflict(ints.h2(p, q, r, s)) {
                    return Err(HamiltonianError::Parse {
                        line: line_no,
                        msg: format!(
                            "conflicting duplicate h2 entry ({}, {}, {}, {})",
                            p + 1,
                            q + 1,
                            r + 1,
                            s + 1
                        ),
                    });
                }
                ints.set_h2(p, q, r, s, value);
                for (a, b, c, d) in [
                    (p, q, r, s),
                    (q, p, r, s),
                    (p, q, s, r),
                    (q, p, s, r),
                    (r, s, p, q),
                    (s, r, p, q),
                    (r, s, q, p),
                    (s, r, q, p),
                ] {
                    seen_h2[((a * norb + b) * norb + c) * norb + d] = true;
                }
            }
            _ => {
                return Err(HamiltonianError::Parse {
                    line: line_no,
                    msg: format!("unsupported index pattern {p} {q} {r} {s}"),
                });
            }
        }
    }
    let _ = body_start;
    Ok(ints)
}

/// Serialize integrals back to FCIDUMP text. One representative per 8-fold
/// h2 orbit, upper-triangle h1, nuclear repulsion last.
pub fn write_fcidump(ints: &FermionIntegrals) -> String {
    let n = ints.n_spatial;
    let ms2 = ints.n_alpha as i64 - ints.n_beta as i64;
    let mut out = format!(
        "&FCI NORB={},NELEC={},MS2={},\n&END\n",
        n,
        ints.n_electrons(),
        ms2
    );
    let mut emitted = vec![false; n.pow(4)];
    for p in 0..n {
        for q in 0..=p {
            for r in 0..n {
                for s in 0..=r {
                    let flat = ((p * n + q) * n + r) * n + s;
                    if emitted[flat] {
                        continue;
                    }
                    let value = ints.h2(p, q, r, s);
                    for (a, b, c, d) in [
                        (p, q, r, s),
                        (q, p, r, s),
                        (p, q, s, r),
                        (q, p, s, r),
                        (r, s, p, q),
                        (s, r, p, q),
                        (r, s, q, p),
                        (s, r, q, p),
                    ] {
                        emitted[((a * n + b) * n + c) * n + d] = true;
                    }
                    if value != 0.0 {
                        out.push_str(&format!(
                            "{:.16E} {} {} {} {}\n",
                            value,
                            p + 1,
                            q + 1,
                            r + 1,
                            s + 1
                        ));
                    }
                }
            }
        }
    }
    for p in 0..n {
        for q in 0..=p {
            let value = ints.h1(p, q);
            if value != 0.0 {
                out.push_str(&format!("{:.16E} {} {} 0 0\n", value, p + 1, q + 1));
            }
        }
    }
    out.push_str(&format!("{:.16E} 0 0 0 0\n", ints.e_nuclear));
    out
}

/// Jordan-Wigner ladder operator on `qubit` of an `n_qubits` register:
/// `(X ± iY)/2` dressed with the Z parity chain on the qubits below.
pub fn ladder_operator(n_qubits: usize, qubit: usize, dagger: bool) -> QubitOperator {
    assert!(qubit < n_qubits, "qubit index out of range");
    let mut x_letters = vec![Pauli::I; n_qubits];
    let mut y_letters = vec![Pauli::I; n_qubits];
    for chain in 0..qubit {
        x_letters[chain] = Pauli::Z;
        y_letters[chain] = Pauli::Z;
    }
    x_letters[qubit] = Pauli::X;
    y_letters[qubit] = Pauli::Y;
    let y_coeff = if dagger {
        Complex64::new(0.0, -0.5)
    } else {
        Complex64::new(0.0, 0.5)
    };
    let mut op = QubitOperator::new(n_qubits);
    op.add_term(PauliString::from_letters(x_letters), Complex64::new(0.5, 0.0));
    op.add_term(PauliString::from_letters(y_letters), y_coeff);
    op
}

/// Product of ladder operators, each `(qubit, dagger)`, right-most applied
/// first (standard operator-product ordering).
pub fn ladder_product(n_qubits: usize, factors: &[(usize, bool)]) -> QubitOperator {
    let mut op = QubitOperator::identity(n_qubits, Complex64::new(1.0, 0.0));
    for &(qubit, dagger) in factors {
        op = op.mul(&ladder_operator(n_qubits, qubit, dagger));
    }
    op
}

/// Qubit index of spatial orbital `p` with alpha spin.
pub fn alpha_qubit(p: usize) -> usize {
    2 * p
}

/// Qubit index of spatial orbital `p` with beta spin.
pub fn beta_qubit(p: usize) -> usize {
    2 * p + 1
}

/// Map the second-quantized molecular Hamiltonian to a qubit operator.
///
/// Output is Hermitian with real coefficients and acts on `2 * n_spatial`
/// qubits; the nuclear repulsion lands on the identity term.
pub fn jordan_wigner(ints: &FermionIntegrals) -> QubitOperator {
    let n = ints.n_spatial();
    let n_qubits = 2 * n;
    let spins: [fn(usize) -> usize; 2] = [alpha_qubit, beta_qubit];

    let mut op = QubitOperator::identity(n_qubits, Complex64::new(ints.e_nuclear(), 0.0));
    for p in 0..n {
        for q in 0..n {
            let h = ints.h1(p, q);
            if h == 0.0 {
                continue;
            }
            for spin in spins {
                let term = ladder_product(n_qubits, &[(spin(p), true), (spin(q), false)]);
                op = op.add(&term.scaled(Complex64::new(h, 0.0)));
            }
        }
    }
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let g = ints.h2(p, q, r, s);
                    if g == 0.0 {
                        continue;
                    }
                    let half_g = Complex64::new(0.5 * g, 0.0);
                    for sig in spins {
                        for tau in spins {
                            // (pq|rs)/2 · a†_{pσ} a†_{rτ} a_{sτ} a_{qσ}
                            let term = ladder_product(
                                n_qubits,
                                &[
                                    (sig(p), true),
                                    (tau(r), true),
                                    (tau(s), false),
                                    (sig(q), false),
                                ],
                            );
                            op = op.add(&term.scaled(half_g));
                        }
                    }
                }
            }
        }
    }
    op.prune();
    debug_assert!(op.is_hermitian(1e-9), "molecular Hamiltonian must be Hermitian");
    op
}

/// Particle-number and (optionally) Sz sector selector. `sz_twice` is 2·Sz so
/// that half-integer sectors stay integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sector {
    pub n_electrons: usize,
    pub sz_twice: Option<i64>,
}

impl Sector {
    pub fn new(n_electrons: usize, sz_twice: i64) -> Self {
        Self {
            n_electrons,
            sz_twice: Some(sz_twice),
        }
    }

    pub fn number_only(n_electrons: usize) -> Self {
        Self {
            n_electrons,
            sz_twice: None,
        }
    }
}

const FCI_DENSE_DIM_MAX: usize = 5000;

/// Minimum eigenvalue of the dense operator, optionally restricted to a
/// particle-number/Sz sector. The independent energy baseline for every
/// experiment; refuses registers above 16 qubits.
pub fn fci_oracle(op: &QubitOperator, sector: Option<Sector>) -> Result<f64, HamiltonianError> {
    let n = op.n_qubits();
    if n > 16 {
        return Err(HamiltonianError::DimensionTooLarge {
            dim: 1 << n,
            max: 1 << 16,
        });
    }
    let full_dim = 1usize << n;
    let basis: Vec<usize> = match sector {
        None => (0..full_dim).collect(),
        Some(sector) => (0..full_dim)
            .filter(|&idx| {
                let n_alpha = (0..n).step_by(2).filter(|&q| idx >> q & 1 == 1).count();
                let n_beta = (1..n).step_by(2).filter(|&q| idx >> q & 1 == 1).count();
                n_alpha + n_beta == sector.n_electrons
                    && sector
                        .sz_twice
                        .map(|sz| n_alpha as i64 - n_beta as i64 == sz)
                        .unwrap_or(true)
            })
            .collect(),
    };
    let dim = basis.len();
    if dim == 0 {
        return Err(HamiltonianError::Invalid("empty sector".into()));
    }
    if dim > FCI_DENSE_DIM_MAX {
        return Err(HamiltonianError::DimensionTooLarge {
            dim,
            max: FCI_DENSE_DIM_MAX,
        });
    }
    let mut position = vec![usize::MAX; full_dim];
    for (pos, &idx) in basis.iter().enumerate() {
        position[idx] = pos;
    }
    let mut matrix: DMatrix<Complex64> = DMatrix::zeros(dim, dim);
    for (col, &idx) in basis.iter().enumerate() {
        for (string, coeff) in op.terms() {
            let (out, phase) = string.act_on_basis(idx);
            let row = position[out];
            if row != usize::MAX {
                matrix[(row, col)] += coeff * phase;
            }
        }
    }
    let eigen = nalgebra::SymmetricEigen::new(matrix);
    Ok(eigen
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min))
}

/// Random integrals satisfying the `FermionIntegrals` symmetry invariants,
/// deterministic in the seed. Property-test input generator.
pub fn synthetic_hamiltonian(n_spatial: usize, seed: u64) -> FermionIntegrals {
    assert!(n_spatial <= 6, "synthetic integrals limited to 6 orbitals");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_alpha = (n_spatial + 1) / 2;
    let n_beta = n_spatial / 2;
    let mut ints = FermionIntegrals::new_zero(n_spatial, n_alpha, n_beta);
    ints.e_nuclear = rng.random_range(-1.0..1.0);
    for p in 0..n_spatial {
        for q in 0..=p {
            let v: f64 = rng.random_range(-1.0..1.0);
            ints.set_h1(p, q, v);
        }
    }
    let mut assigned = vec![false; n_spatial.pow(4)];
    for p in 0..n_spatial {
        for q in 0..n_spatial {
            for r in 0..n_spatial {
                for s in 0..n_spatial {
                    let flat = ((p * n_spatial + q) * n_spatial + r) * n_spatial + s;
                    if assigned[flat] {
                        continue;
                    }
                    let v: f64 = rng.random_range(-1.0..1.0);
                    ints.set_h2(p, q, r, s, v);
                    for (a, b, c, d) in [
                        (p, q, r, s),
                        (q, p, r, s),
                        (p, q, s, r),
                        (q, p, s, r),
                        (r, s, p, q),
                        (s, r, p, q),
                        (r, s, q, p),
                        (s, r, q, p),
                    ] {
                        assigned[((a * n_spatial + b) * n_spatial + c) * n_spatial + d] = true;
                    }
                }
            }
        }
    }
    ints
}

/// Total fermion-number operator `Σ_q (I - Z_q)/2`.
pub fn number_operator(n_qubits: usize) -> QubitOperator {
    let mut op = QubitOperator::identity(n_qubits, Complex64::new(n_qubits as f64 / 2.0, 0.0));
    for q in 0..n_qubits {
        op.add_term(
            PauliString::single(n_qubits, q, Pauli::Z),
            Complex64::new(-0.5, 0.0),
        );
    }
    op
}

/// Sz operator `(N_alpha - N_beta)/2` in the interleaved spin-orbital layout.
pub fn sz_operator(n_qubits: usize) -> QubitOperator {
    assert!(n_qubits % 2 == 0, "Sz needs an even spin-orbital count");
    let mut op = QubitOperator::new(n_qubits);
    for q in 0..n_qubits {
        let sign = if q % 2 == 0 { -0.25 } else { 0.25 };
        op.add_term(
            PauliString::single(n_qubits, q, Pauli::Z),
            Complex64::new(sign, 0.0),
        );
    }
    op
}

#[allow(unused)]
fn complex(re: f64) -> Complex<f64> {
    Complex::new(re, 0.0)
}
