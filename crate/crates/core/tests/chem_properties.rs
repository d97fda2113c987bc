mod support;

use cliffbench_core::chem::{graph_key, parse_smiles, write_canonical_smiles, Molecule};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{isomorphic, CORPUS};

fn random_permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

#[test]
fn canonical_smiles_is_invariant_under_atom_reordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for smiles in CORPUS {
        let mol = parse_smiles(smiles).unwrap();
        let reference = write_canonical_smiles(&mol);
        for _ in 0..1000 {
            let perm = random_permutation(mol.atom_count(), &mut rng);
            let shuffled = mol.permuted(&perm);
            assert_eq!(write_canonical_smiles(&shuffled), reference, "{smiles} under {perm:?}");
        }
    }
}

#[test]
fn round_trip_is_isomorphic() {
    for smiles in CORPUS {
        let mol = parse_smiles(smiles).unwrap();
        let written = write_canonical_smiles(&mol);
        let back = parse_smiles(&written).unwrap();
        assert!(mol.atom_count() <= 40);
        assert!(isomorphic(&mol, &back), "{smiles} -> {written}");
        assert_eq!(write_canonical_smiles(&back), written);
    }
}

#[test]
fn neutral_organic_atoms_conserve_valence() {
    for smiles in CORPUS {
        let mol = parse_smiles(smiles).unwrap();
        for (i, atom) in mol.atoms().iter().enumerate() {
            if atom.formal_charge != 0 || !atom.element.is_organic_subset() {
                continue;
            }
            let total = mol.bond_valence_sum(i) + atom.implicit_h as u32;
            let valences = atom.element.default_valences();
            // aromatic bonds count 1 each, so one unit of valence may be delocalised
            let ok = valences.iter().any(|&v| {
                let v = v as u32;
                v == total || (atom.aromatic && v == total + 1)
            });
            assert!(
                ok,
                "{smiles}: atom {i} total {total}"
            );
        }
    }
}

#[test]
fn graph_keys_distinguish_corpus_members() {
    let mut keys: Vec<_> = CORPUS.iter().map(|s| (graph_key(&parse_smiles(s).unwrap()), *s)).collect();
    keys.sort();
    // benzene appears twice (aromatic and Kekule) and they are different graphs here
    for w in keys.windows(2) {
        assert_ne!(w[0].0, w[1].0, "{} vs {}", w[0].1, w[1].1);
    }
}

#[test]
fn toluene_has_one_acyclic_bond() {
    let mol: Molecule = parse_smiles("Cc1ccccc1").unwrap();
    assert_eq!(mol.bonds().iter().filter(|b| !b.in_ring).count(), 1);
    let benzene = parse_smiles("c1ccccc1").unwrap();
    assert!(benzene.bonds().iter().all(|b| b.in_ring));
    assert!(parse_smiles("CCO").unwrap().bonds().iter().all(|b| !b.in_ring));
}
