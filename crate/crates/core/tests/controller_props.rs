mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use instructa::command::execute;
use instructa::controller::{CycleStatus, Executor, REMAINING_KEY};
use instructa::skills::default_library;
use instructa::{Response, Scene, World};

use common::*;

fn duration_budget(steps: usize) -> usize {
    // worst case per step: a long motion or a gripper timeout, at 20 Hz
    steps * 20 * 20 + 100
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn every_program_terminates(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = random_steps(&mut rng, 8);
        let budget = duration_budget(steps.len());
        let mut ex = Executor::new(World::new(Scene::default()), &default_library()).unwrap();
        let status = ex.run(steps, budget);
        prop_assert!(matches!(status, Some(CycleStatus::Succeeded | CycleStatus::Failed(_))), "{:?}", status);
        prop_assert!(!ex.is_busy());
    }

    #[test]
    fn remaining_counts_unfinished_steps(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = random_steps(&mut rng, 8);
        let len = steps.len();
        let mut ex = Executor::new(World::new(Scene::default()), &default_library()).unwrap();
        ex.start(steps);
        loop {
            let status = ex.cycle();
            if status != CycleStatus::Running {
                break;
            }
            let raised = ex.board().chooser_flags().iter().any(|f| *f) as usize;
            let completed = ex.plant().invocations.len() - raised;
            prop_assert_eq!(ex.remaining(), len - completed);
            prop_assert_eq!(ex.board().get_number(REMAINING_KEY).unwrap(), ex.remaining() as f64);
        }
    }

    #[test]
    fn outcomes_follow_submission_order(picks in prop::collection::vec(0..6usize, 1..6)) {
        let commands = [
            "move_hand(translation=[0,0,5])",
            "move_hand(translation=[0,0,-5])",
            "pickup_brick('blue')",
            "drop_brick()",
            "move_by_object('purple')",
            "locate('green_short')",
        ];
        let mut s = session();
        let mut ids = Vec::new();
        for &i in &picks {
            match execute(commands[i], &mut s).unwrap() {
                Response::EventId(id) => ids.push(id),
                other => return Err(TestCaseError::fail(format!("{other:?}"))),
            }
        }
        prop_assert!(s.run_until_idle(50_000).unwrap());
        let order: Vec<_> = s.outcomes().iter().map(|o| o.task_id).collect();
        prop_assert_eq!(order, ids.clone());
        for (id, text) in ids.iter().zip(picks.iter().map(|&i| commands[i])) {
            let event = s.kg().event(*id).unwrap();
            prop_assert_eq!(event.signature.as_deref(), Some(text));
        }
        let ts: Vec<_> = s.outcomes().iter().map(|o| o.ts).collect();
        prop_assert!(ts.windows(2).all(|w| w[0] <= w[1]));
    }
}
