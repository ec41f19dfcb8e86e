//! Two publishers, two subscribers, one topic; then a late subscriber
//! resumes from the retained backlog.

use neuroloop::gateway::{BehaviorEvent, BehaviorKind, Broker, Topic};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let broker = Broker::default();
    let mut subs = vec![broker.subscribe(Topic::BehaviorEvents, None)?, broker.subscribe(Topic::BehaviorEvents, None)?];

    let handles: Vec<_> = (0..2)
        .map(|p| {
            let broker = broker.clone();
            tokio::spawn(async move {
                for i in 0..3 {
                    let ev = BehaviorEvent::new(
                        "demo",
                        BehaviorKind::AnswerSubmitted { question_id: format!("{p}:{i}"), correct: true, reaction_time_ms: 900.0 },
                    );
                    broker.publish(Topic::BehaviorEvents, &ev).unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.await?;
    }

    for (n, sub) in subs.iter_mut().enumerate() {
        for _ in 0..6 {
            let env = sub.recv().await.unwrap();
            println!("sub{n} seq {} {}", env.seq, env.payload);
        }
    }

    let mut late = broker.subscribe(Topic::BehaviorEvents, Some(4))?;
    broker.close();
    while let Some(env) = late.recv().await {
        println!("late seq {}", env.seq);
    }
    println!("{}", serde_json::to_string_pretty(&broker.metrics())?);
    Ok(())
}
