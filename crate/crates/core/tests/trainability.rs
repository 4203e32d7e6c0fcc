use acpkan::train::{TrainConfig, Trainer};

#[test]
fn reaction_desk_loss_drops_hundredfold_by_step_2000() {
    let mut trainer = Trainer::new(TrainConfig::default()).unwrap();
    let log = trainer.run(2001, |_| {}).unwrap();
    assert!(log.error.is_none());
    let (first, at_2000) = (log.rows[0].loss_total, log.rows[2000].loss_total);
    assert!(first >= 100.0 * at_2000, "loss {first:e} at step 0, {at_2000:e} at step 2000");
}
