"""Regenerate the bundled Hamiltonian files in src/fermigrad/data/.

Needs pyscf, which is NOT a dependency of the package; run it from an
environment that has both pyscf and fermigrad installed:

    python scripts/generate_bundled_data.py

Molecular integrals come from a restricted Hartree-Fock calculation.  The
spin-orbital Hamiltonian

    H = E_nuc + Σ h_pq a†_p a_q + ½ Σ <pq|rs> a†_p a†_q a_s a_r

is built with interleaved spin orbitals (2j up, 2j+1 down) and encoded with
fermigrad's Jordan-Wigner map.  HF and FCI energies from pyscf are stored as
metadata and checked against dense diagonalization of the encoded operator.
"""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np
import pyscf
from pyscf import ao2mo, fci, gto, scf

from fermigrad.exact import dense_spectrum
from fermigrad.fermion import FermionOperator, jordan_wigner
from fermigrad.io import ProblemFile
from fermigrad.simulator import Circuit, BasisFlip, expectation

DATA = Path(__file__).resolve().parents[1] / "src" / "fermigrad" / "data"

PROBLEMS = [
    ("h2_sto3g_0.7414", "sto-3g", 0.7414),
    ("h2_sto3g_1.0", "sto-3g", 1.0),
    ("h2_sto3g_1.5", "sto-3g", 1.5),
    ("h2_631g_0.7414", "6-31g", 0.7414),
]


def molecular_hamiltonian(h1: np.ndarray, eri: np.ndarray, e_nuc: float) -> FermionOperator:
    n_spatial = h1.shape[0]
    n = 2 * n_spatial
    terms = [(e_nuc, ())]
    for p, q in itertools.product(range(n), repeat=2):
        if p % 2 != q % 2:
            continue
        h = h1[p // 2, q // 2]
        if abs(h) > 1e-14:
            terms.append((h, ((p, True), (q, False))))
    for p, q, r, s in itertools.product(range(n), repeat=4):
        if p % 2 != r % 2 or q % 2 != s % 2 or p == q or r == s:
            continue
        # <pq|rs> = (pr|qs) in chemists' notation
        v = eri[p // 2, r // 2, q // 2, s // 2]
        if abs(v) > 1e-14:
            terms.append((0.5 * v, ((p, True), (q, True), (s, False), (r, False))))
    return FermionOperator(terms)


def build(name: str, basis: str, bond: float) -> ProblemFile:
    mol = gto.M(atom=f"H 0 0 0; H 0 0 {bond}", basis=basis, unit="Angstrom", verbose=0)
    mf = scf.RHF(mol).run()
    c = mf.mo_coeff
    h1 = c.T @ mf.get_hcore() @ c
    n_spatial = h1.shape[0]
    eri = ao2mo.restore(1, ao2mo.kernel(mol, c), n_spatial)
    e_fci = fci.FCI(mf).kernel()[0]

    n = 2 * n_spatial
    ham = jordan_wigner(molecular_hamiltonian(h1, eri, mol.energy_nuc()), n).real()
    occupied = list(range(mol.nelectron))
    hf_circuit = Circuit(tuple(BasisFlip(q) for q in occupied), n)
    e_hf = expectation(hf_circuit, {}, ham)
    e_ground = dense_spectrum(ham, n, 1)[0]
    assert abs(e_hf - mf.e_tot) < 1e-8, (e_hf, mf.e_tot)
    assert abs(e_ground - e_fci) < 1e-8, (e_ground, e_fci)

    meta = {
        "name": name,
        "n_qubits": str(n),
        "n_electrons": str(mol.nelectron),
        "hf_occupied": " ".join(map(str, occupied)),
        "hf_energy": repr(float(e_hf)),
        "fci_energy": repr(float(e_fci)),
        "molecule": "H2",
        "geometry": f"H 0 0 0; H 0 0 {bond} (angstrom)",
        "basis": basis,
        "encoding": "jordan-wigner, Z string on higher qubits, interleaved spin orbitals",
        "source": f"pyscf {pyscf.__version__} RHF molecular orbitals",
    }
    return ProblemFile(hamiltonian=ham, n_qubits=n, metadata=meta)


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    for name, basis, bond in PROBLEMS:
        problem = build(name, basis, bond)
        path = DATA / f"{name}.ham"
        path.write_text(problem.to_text())
        print(f"{path.name}: {len(problem.hamiltonian)} terms, "
              f"HF {problem.metadata['hf_energy']}, FCI {problem.metadata['fci_energy']}")


if __name__ == "__main__":
    main()
