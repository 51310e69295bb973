use derivgen::data::{EmbeddingTable, Instance};
use derivgen::encoder::VariantConfig;
use derivgen::model::{Model, ModelConfig};
use derivgen::optim::SgdMomentum;
use derivgen::train::{train, TrainConfig};

fn blorify() -> Instance {
    Instance {
        left: "the committee approved the".split(' ').map(str::to_owned).collect(),
        right: "of the budget".split(' ').map(str::to_owned).collect(),
        base: "blorify".into(),
        target: "blorification".into(),
        pos: "NOUN".into(),
        suffix: "-ation".into(),
    }
}

fn small(variant: VariantConfig) -> ModelConfig {
    ModelConfig {
        variant,
        hidden: 16,
        layers: 1,
        char_dim: 16,
        word_dim: 16,
        pos_dim: 4,
        ..ModelConfig::default()
    }
}

#[test]
fn overfits_single_example() {
    let inst = blorify();
    let emb = EmbeddingTable::hashed(16, 2);
    let mut model = Model::for_instances(small(VariantConfig::BILSTM_CTX_BS_POS), std::slice::from_ref(&inst), 4).unwrap();
    let opt = SgdMomentum {
        lr: 0.02,
        momentum: 0.9,
        clip_norm: Some(5.0),
    };
    let first = model.loss_value(&inst, &emb).unwrap();
    let mut last = first;
    for _ in 0..2000 {
        last = model.train_step(&inst, &emb, &opt).unwrap();
        if last < 0.01 {
            break;
        }
    }
    assert!(last < 0.01, "loss {first} -> {last}");
    assert_eq!(model.predict(&inst, &emb).unwrap().form, "blorification");
}

#[test]
fn early_stopping_restores_best_epoch() {
    let inst = blorify();
    let emb = EmbeddingTable::hashed(16, 2);
    let mut model = Model::for_instances(small(VariantConfig::BILSTM_CTX_BS), std::slice::from_ref(&inst), 4).unwrap();
    let cfg = TrainConfig {
        optimizer: SgdMomentum {
            lr: 0.02,
            momentum: 0.9,
            clip_norm: Some(5.0),
        },
        max_epochs: 200,
        patience: 200,
        seed: 1,
        target_accuracy: Some(1.0),
    };
    let data = [inst.clone()];
    let out = train(&mut model, &emb, &data, &data, &cfg, |_| {}).unwrap();
    assert_eq!(out.best_dev_accuracy, Some(1.0));
    assert_eq!(out.epochs_run, out.best_epoch);
    assert_eq!(model.predict(&inst, &emb).unwrap().form, "blorification");
}

#[test]
fn patience_stops_a_stalled_run() {
    let inst = blorify();
    let emb = EmbeddingTable::hashed(16, 2);
    let mut model = Model::for_instances(small(VariantConfig::BILSTM_CTX_BS), std::slice::from_ref(&inst), 4).unwrap();
    let cfg = TrainConfig {
        optimizer: SgdMomentum {
            lr: 0.0,
            momentum: 0.0,
            clip_norm: None,
        },
        max_epochs: 50,
        patience: 3,
        ..TrainConfig::default()
    };
    let data = [inst];
    let out = train(&mut model, &emb, &data, &data, &cfg, |_| {}).unwrap();
    assert_eq!(out.epochs_run, 4);
    assert_eq!(out.best_epoch, 1);
}
