//! Truth-table oracle for every public BDD operation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrtl_core::bdd::{Bdd, Manager, VarSet};

/// Truth table over `n` variables; row `r` assigns variable `i` to bit `i`
/// of `r`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Table {
    n: u32,
    rows: Vec<bool>,
}

impl Table {
    fn from_fn(n: u32, f: impl Fn(usize) -> bool) -> Table {
        Table {
            n,
            rows: (0..1usize << n).map(f).collect(),
        }
    }

    fn from_bits(n: u32, bits: u64) -> Table {
        Table::from_fn(n, |r| bits >> r & 1 == 1)
    }

    fn random(n: u32, rng: &mut ChaCha8Rng) -> Table {
        // biased densities keep sparse and dense functions in the mix
        let p: f64 = [0.5, 0.1, 0.9, 0.3][rng.gen_range(0..4)];
        let rows = (0..1usize << n).map(|_| rng.gen_bool(p)).collect();
        Table { n, rows }
    }

    fn zip(&self, o: &Table, op: impl Fn(bool, bool) -> bool) -> Table {
        Table::from_fn(self.n, |r| op(self.rows[r], o.rows[r]))
    }

    fn exists(&self, vars: &[u32]) -> Table {
        let mut t = self.clone();
        for &v in vars {
            let bit = 1usize << v;
            t = Table::from_fn(self.n, |r| t.rows[r & !bit] || t.rows[r | bit]);
        }
        t
    }

    /// Variable `from` of `self` becomes variable `to` of the result.
    fn rename(&self, map: &[(u32, u32)]) -> Table {
        Table::from_fn(self.n, |r| {
            let mut src = r;
            for &(from, _) in map {
                src &= !(1 << from);
            }
            for &(from, to) in map {
                if r >> to & 1 == 1 {
                    src |= 1 << from;
                }
            }
            self.rows[src]
        })
    }

    fn support(&self) -> Vec<u32> {
        (0..self.n)
            .filter(|&v| {
                let bit = 1usize << v;
                (0..self.rows.len()).any(|r| self.rows[r & !bit] != self.rows[r | bit])
            })
            .collect()
    }

    fn count(&self) -> usize {
        self.rows.iter().filter(|b| **b).count()
    }
}

fn build(m: &mut Manager, t: &Table) -> Bdd {
    fn rec(m: &mut Manager, t: &Table, var: u32, base: usize) -> Bdd {
        if var == t.n {
            return Manager::constant(t.rows[base]);
        }
        // Shannon expansion on the lowest unassigned variable
        let lo = rec(m, t, var + 1, base);
        let hi = rec(m, t, var + 1, base | 1 << var);
        m.mk(var, lo, hi).unwrap()
    }
    rec(m, t, 0, 0)
}

fn table_of(m: &Manager, f: Bdd, n: u32) -> Table {
    Table::from_fn(n, |r| m.eval(f, |v| r >> v & 1 == 1))
}

fn subsets(n: u32) -> impl Iterator<Item = Vec<u32>> {
    (0u32..1 << n).map(move |s| (0..n).filter(|v| s >> v & 1 == 1).collect())
}

fn check_unary_ops(m: &mut Manager, t: &Table, quant_sets: &[Vec<u32>]) {
    let n = t.n;
    let f = build(m, t);
    assert_eq!(table_of(m, f, n), *t);

    let nf = m.not(f).unwrap();
    assert_eq!(table_of(m, nf, n), Table::from_fn(n, |r| !t.rows[r]));

    for vars in quant_sets {
        let set = VarSet::new(vars.iter().copied());
        let e = m.exists(f, &set).unwrap();
        let expect = t.exists(vars);
        assert_eq!(e, build(m, &expect), "exists {vars:?}");
        let a = m.forall(f, &set).unwrap();
        let nt = Table::from_fn(n, |r| !t.rows[r]).exists(vars);
        assert_eq!(table_of(m, a, n), Table::from_fn(n, |r| !nt.rows[r]));
    }

    for v in 0..n {
        for value in [false, true] {
            let r = m.restrict(f, v, value).unwrap();
            let bit = 1usize << v;
            let expect =
                Table::from_fn(n, |row| t.rows[if value { row | bit } else { row & !bit }]);
            assert_eq!(r, build(m, &expect));
        }
    }

    match m.sat_one(f) {
        None => assert_eq!(t.count(), 0),
        Some(a) => {
            assert!(m.eval(f, |v| a[v as usize]));
            let row: usize = (0..n).filter(|&v| a[v as usize]).map(|v| 1 << v).sum();
            assert!(t.rows[row]);
        }
    }

    assert_eq!(m.support(f), t.support());
    assert_eq!(m.sat_count(f, n) as usize, t.count());
}

type BoolOp = fn(bool, bool) -> bool;

fn check_binary_ops(m: &mut Manager, s: &Table, t: &Table) {
    let (f, g) = (build(m, s), build(m, t));
    let cases: [(&str, Bdd, BoolOp); 5] = [
        ("and", m.and(f, g).unwrap(), |a, b| a && b),
        ("or", m.or(f, g).unwrap(), |a, b| a || b),
        ("xor", m.xor(f, g).unwrap(), |a, b| a ^ b),
        ("xnor", m.xnor(f, g).unwrap(), |a, b| a == b),
        ("imp", m.imp(f, g).unwrap(), |a, b| !a || b),
    ];
    for (name, r, op) in cases {
        let expect = s.zip(t, op);
        assert_eq!(r, build(m, &expect), "{name} not canonical");
    }
}

fn check_and_exists(m: &mut Manager, s: &Table, t: &Table, vars: &[u32]) {
    let (f, g) = (build(m, s), build(m, t));
    let r = m
        .and_exists(f, g, &VarSet::new(vars.iter().copied()))
        .unwrap();
    let expect = s.zip(t, |a, b| a && b).exists(vars);
    assert_eq!(r, build(m, &expect), "and_exists {vars:?}");
}

fn check_ite(m: &mut Manager, a: &Table, b: &Table, c: &Table) {
    let (f, g, h) = (build(m, a), build(m, b), build(m, c));
    let r = m.ite(f, g, h).unwrap();
    let expect = Table::from_fn(a.n, |row| {
        if a.rows[row] {
            b.rows[row]
        } else {
            c.rows[row]
        }
    });
    assert_eq!(r, build(m, &expect));
}

fn permutations(n: u32) -> Vec<Vec<u32>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn check_rename(m: &mut Manager, t: &Table, perm: &[u32]) {
    let f = build(m, t);
    let map: Vec<(u32, u32)> = perm
        .iter()
        .enumerate()
        .map(|(i, &p)| (i as u32, p))
        .collect();
    let r = m.rename(f, &map).unwrap();
    assert_eq!(r, build(m, &t.rename(&map)), "rename {perm:?}");
}

pub fn three_variable_pairs_exhaustive() {
    let mut m = Manager::new(3);
    let tables: Vec<Table> = (0..256).map(|b| Table::from_bits(3, b)).collect();
    for s in &tables {
        for t in &tables {
            check_binary_ops(&mut m, s, t);
        }
    }
    m.audit().unwrap();
}

pub fn unary_ops_exhaustive_up_to_four_variables() {
    for n in 0..=4u32 {
        let mut m = Manager::new(n);
        let sets: Vec<Vec<u32>> = subsets(n).collect();
        let perms = permutations(n);
        for bits in 0..1u64 << (1 << n) {
            let t = Table::from_bits(n, bits);
            check_unary_ops(&mut m, &t, &sets);
            for p in &perms {
                check_rename(&mut m, &t, p);
            }
        }
        m.audit().unwrap();
    }
}

pub fn and_exists_exhaustive_on_three_variables() {
    let mut m = Manager::new(3);
    let tables: Vec<Table> = (0..256).map(|b| Table::from_bits(3, b)).collect();
    let sets: Vec<Vec<u32>> = subsets(3).collect();
    for s in &tables {
        for t in &tables {
            for vars in &sets {
                check_and_exists(&mut m, s, t, vars);
            }
        }
    }
    m.audit().unwrap();
}

pub fn ite_exhaustive_on_two_variables() {
    let mut m = Manager::new(2);
    let tables: Vec<Table> = (0..16).map(|b| Table::from_bits(2, b)).collect();
    for a in &tables {
        for b in &tables {
            for c in &tables {
                check_ite(&mut m, a, b, c);
            }
        }
    }
    m.audit().unwrap();
}

pub fn every_four_variable_function_against_random_partners() {
    // all pairs of 4-variable functions is 2^32; cover every function as the
    // left operand against a fixed random set of partners
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut m = Manager::new(4);
    let partners: Vec<Table> = (0..8).map(|_| Table::random(4, &mut rng)).collect();
    let sets: Vec<Vec<u32>> = subsets(4).collect();
    for bits in 0..1u64 << 16 {
        let s = Table::from_bits(4, bits);
        let t = &partners[bits as usize % partners.len()];
        check_binary_ops(&mut m, &s, t);
        check_and_exists(&mut m, &s, t, &sets[bits as usize % sets.len()]);
        check_ite(
            &mut m,
            &s,
            t,
            &partners[(bits as usize / 8) % partners.len()],
        );
    }
    m.audit().unwrap();
}

pub fn random_ten_variable_instances() {
    const N: u32 = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut m = Manager::new(N);
    for i in 0..10_000 {
        if i % 500 == 0 {
            m = Manager::new(N);
        }
        let s = Table::random(N, &mut rng);
        let t = Table::random(N, &mut rng);
        let u = Table::random(N, &mut rng);
        let vars: Vec<u32> = (0..N).filter(|_| rng.gen_bool(0.3)).collect();
        check_unary_ops(&mut m, &s, std::slice::from_ref(&vars));
        check_binary_ops(&mut m, &s, &t);
        check_and_exists(&mut m, &s, &t, &vars);
        check_ite(&mut m, &s, &t, &u);
        let mut perm: Vec<u32> = (0..N).collect();
        for k in (1..perm.len()).rev() {
            perm.swap(k, rng.gen_range(0..=k));
        }
        check_rename(&mut m, &s, &perm);
        if i % 500 == 499 {
            m.audit().unwrap();
        }
    }
}

/// Every exhaustive suite over at most four variables.
pub fn exhaustive() {
    three_variable_pairs_exhaustive();
    unary_ops_exhaustive_up_to_four_variables();
    and_exists_exhaustive_on_three_variables();
    ite_exhaustive_on_two_variables();
    every_four_variable_function_against_random_partners();
}
