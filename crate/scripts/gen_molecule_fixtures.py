"""Generate the bundled molecular Hamiltonian fixtures.

Requires pyscf and openfermion. Not needed to build or test the crates; the
JSON outputs are committed under crates/core/fixtures/.

The committed files were then re-emitted in canonical term order with
`adapt model --input <file> --output <file>`, which the round-trip tests
require.

Spin-orbital ordering is interleaved (even = alpha, odd = beta), Jordan-Wigner
mapped, qubit i = spin-orbital i. Pauli strings are written site 0 leftmost.
"""
import json
import sys

import numpy as np
from openfermion import jordan_wigner, get_fermion_operator
from openfermion.linalg import get_sparse_operator, jw_get_ground_state_at_particle_number
from pyscf import gto, scf, ao2mo
from openfermion.ops import InteractionOperator
from openfermion.chem.molecular_data import spinorb_from_spatial


def molecule(atoms, name, bond):
    mol = gto.M(atom=atoms, basis="sto-3g", unit="angstrom", verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    c = mf.mo_coeff
    h1 = c.T @ mf.get_hcore() @ c
    nmo = c.shape[1]
    eri = ao2mo.restore(1, ao2mo.kernel(mol, c), nmo)
    # physicist ordering <pq|rs> stored as (p, s, q, r) chemist -> openfermion convention
    two = np.asarray(eri.transpose(0, 2, 3, 1), order="C")
    one_so, two_so = spinorb_from_spatial(h1, two)
    op = InteractionOperator(mol.energy_nuc(), one_so, 0.5 * two_so)
    qham = jordan_wigner(get_fermion_operator(op))
    qham.compress(1e-12)
    n_qubits = 2 * nmo
    n_el = mol.nelectron
    terms = []
    for term, coeff in sorted(qham.terms.items()):
        letters = ["I"] * n_qubits
        for idx, p in term:
            letters[idx] = p
        terms.append({"pauli": "".join(letters), "re": float(np.real(coeff)), "im": 0.0})
        assert abs(np.imag(coeff)) < 1e-12
    sparse = get_sparse_operator(qham, n_qubits=n_qubits)
    exact, _ = jw_get_ground_state_at_particle_number(sparse, n_el)
    ref = "1" * n_el + "0" * (n_qubits - n_el)
    # HF determinant expectation, openfermion basis index has qubit 0 as MSB
    idx = int(ref, 2)
    hf = float(np.real(sparse[idx, idx]))
    assert abs(hf - mf.e_tot) < 1e-8, (hf, mf.e_tot)
    return {
        "n_qubits": n_qubits,
        "terms": terms,
        "metadata": {
            "name": name,
            "n_electrons": n_el,
            "reference_bitstring": ref,
            "exact_ground_energy": float(exact),
            "hf_energy": hf,
            "units": "hartree",
            "generation": f"pyscf RHF/STO-3G, no frozen core, bond {bond} angstrom, "
                          "openfermion Jordan-Wigner, interleaved spin orbitals",
        },
    }


def chain(n, r):
    return "; ".join(f"H 0 0 {i * r:.6f}" for i in range(n))


def main(out):
    fixtures = {
        "h2_sto3g_0p7414.json": molecule(chain(2, 0.7414), "H2", 0.7414),
        "h4_linear_sto3g_1p0.json": molecule(chain(4, 1.0), "H4 linear (equilibrium)", 1.0),
        "h4_linear_sto3g_3p0.json": molecule(chain(4, 3.0), "H4 linear (stretched)", 3.0),
    }
    for fname, data in fixtures.items():
        with open(f"{out}/{fname}", "w") as fh:
            json.dump(data, fh, indent=2)
            fh.write("\n")
        m = data["metadata"]
        print(fname, len(data["terms"]), m["hf_energy"], m["exact_ground_energy"])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/fixtures")
