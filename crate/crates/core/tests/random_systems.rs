use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrtl_core::engine::{cross_validate, random_module, seeded_system, Limits, Shape, Verdict};
use vrtl_core::ir::{Assignment, ModuleIr, Simulator};
use vrtl_core::netlist::{bitblast, BooleanNetlist};

fn word_of(bits: &[(String, u32, bool)], signal: &str) -> u64 {
    bits.iter()
        .filter(|(s, _, _)| s == signal)
        .fold(0, |acc, (_, b, v)| acc | (*v as u64) << b)
}

/// Runs the netlist and the interpreter side by side from reset.
fn lockstep(
    m: &ModuleIr,
    b: &BooleanNetlist,
    rng: &mut ChaCha8Rng,
    cycles: usize,
) -> Result<(), String> {
    let sim = Simulator::new(m).unwrap();
    let mut state = m.reset_state();
    let mut bits: Vec<bool> = b.states.iter().map(|s| s.init).collect();
    for cycle in 0..cycles {
        let inputs: Assignment = m
            .inputs
            .iter()
            .map(|p| {
                (
                    p.name.clone(),
                    rng.gen::<u64>() & vrtl_core::ir::mask(p.width),
                )
            })
            .collect();
        let ibits: Vec<bool> = b
            .inputs
            .iter()
            .map(|n| inputs[&n.signal] >> n.bit & 1 == 1)
            .collect();
        let (outs, next) = sim.step(&state, &inputs).unwrap();
        let (obits, nbits) = b.eval(&ibits, &bits);
        let named = |names: Vec<(String, u32)>, vals: &[bool]| -> Vec<(String, u32, bool)> {
            names
                .into_iter()
                .zip(vals)
                .map(|((s, i), v)| (s, i, *v))
                .collect()
        };
        let o = named(
            b.outputs
                .iter()
                .map(|(n, _)| (n.signal.clone(), n.bit))
                .collect(),
            &obits,
        );
        for (name, v) in &outs {
            if word_of(&o, name) != *v {
                return Err(format!(
                    "cycle {cycle}: output {name} netlist {} interp {v}",
                    word_of(&o, name)
                ));
            }
        }
        let n = named(
            b.states
                .iter()
                .map(|s| (s.name.signal.clone(), s.name.bit))
                .collect(),
            &nbits,
        );
        for (name, v) in &next {
            if word_of(&n, name) != *v {
                return Err(format!(
                    "cycle {cycle}: next {name} netlist {} interp {v}",
                    word_of(&n, name)
                ));
            }
        }
        state = next;
        bits = nbits;
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bitblasting_preserves_behaviour(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape { max_state_bits: 16, max_input_bits: 12, max_depth: 4 };
        let m = random_module(&mut rng, &shape);
        prop_assert!(m.validate().is_ok());
        let b = bitblast(&m).unwrap();
        if let Err(e) = lockstep(&m, &b, &mut rng, 12) {
            return Err(TestCaseError::fail(format!("{e}\n{}", vrtl_core::ir::text::dump(&m))));
        }
    }
}

#[test]
fn engines_agree_on_random_systems() {
    let limits = Limits::default();
    let (mut holds, mut violated, mut deep, mut vacuous) = (0, 0, 0, 0);
    for seed in 0..120u64 {
        let (m, c) = seeded_system(seed, &Shape::default());
        let x = cross_validate(&m, &c, &limits).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        match x.explicit.verdict {
            Verdict::Holds => holds += 1,
            Verdict::Violated(ref t) => {
                violated += 1;
                deep += (t.len() > 2) as usize;
            }
            Verdict::HoldsVacuously => vacuous += 1,
            ref v => panic!("seed {seed}: unexpected {}", v.keyword()),
        }
    }
    // the sample must exercise both outcomes and non-trivial depths
    assert!(
        holds >= 10 && violated >= 10 && deep >= 5,
        "holds {holds} violated {violated} deep {deep} vacuous {vacuous}"
    );
}
