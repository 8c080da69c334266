//! A single thread owns the [`AiPlane`]; callers talk to it over a channel.

use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread::JoinHandle;

use super::{AiPlane, AiPlaneError, Deployment, DeploymentEvent, DeploymentOutcome, PipelineManifest, ResourcePool};

enum Command {
    Register(PipelineManifest, Sender<Result<String, AiPlaneError>>),
    GetPipeline(String, Sender<Result<PipelineManifest, AiPlaneError>>),
    Deploy(String, Sender<DeploymentOutcome>),
    Release(String, Sender<Result<bool, AiPlaneError>>),
    Status(String, Sender<Result<Deployment, AiPlaneError>>),
    Pool(Sender<ResourcePool>),
    Events(Sender<Vec<DeploymentEvent>>),
    Stop(Sender<AiPlane>),
}

/// Cloneable client of a running event loop. Each call enqueues one
/// command; commands are applied strictly in arrival order.
#[derive(Clone)]
pub struct PlaneHandle {
    tx: Sender<Command>,
}

pub struct PlaneService {
    handle: PlaneHandle,
    join: Option<JoinHandle<()>>,
}

impl PlaneService {
    pub fn spawn(mut plane: AiPlane) -> Self {
        let (tx, rx) = channel::<Command>();
        let join = std::thread::Builder::new()
            .name("aiplane".into())
            .spawn(move || {
                for cmd in rx {
                    // A caller that dropped its reply receiver is not an error for the loop.
                    match cmd {
                        Command::Register(m, r) => drop(r.send(plane.register_pipeline(m))),
                        Command::GetPipeline(id, r) => drop(r.send(plane.get_pipeline(&id).cloned())),
                        Command::Deploy(id, r) => drop(r.send(plane.deploy(&id))),
                        Command::Release(id, r) => drop(r.send(plane.release(&id))),
                        Command::Status(id, r) => drop(r.send(plane.deployment(&id).cloned())),
                        Command::Pool(r) => drop(r.send(plane.pool.clone())),
                        Command::Events(r) => drop(r.send(plane.events.clone())),
                        Command::Stop(r) => {
                            let _ = r.send(plane);
                            return;
                        }
                    }
                }
            })
            .expect("spawn event loop thread");
        PlaneService { handle: PlaneHandle { tx }, join: Some(join) }
    }

    pub fn handle(&self) -> PlaneHandle {
        self.handle.clone()
    }

    /// Stops the loop once every earlier command is done and returns the state.
    pub fn shutdown(mut self) -> AiPlane {
        let (r, rx) = channel();
        self.handle.tx.send(Command::Stop(r)).expect("event loop alive");
        let plane = rx.recv().expect("event loop returns its state");
        if let Some(j) = self.join.take() {
            let _ = j.join();
        }
        plane
    }
}

impl PlaneHandle {
    fn ask<T>(&self, make: impl FnOnce(Sender<T>) -> Command) -> Receiver<T> {
        let (r, rx) = channel();
        self.tx.send(make(r)).expect("event loop alive");
        rx
    }

    pub fn register(&self, m: PipelineManifest) -> Result<String, AiPlaneError> {
        self.ask(|r| Command::Register(m, r)).recv().expect("reply")
    }

    pub fn get_pipeline(&self, id: &str) -> Result<PipelineManifest, AiPlaneError> {
        self.ask(|r| Command::GetPipeline(id.to_string(), r)).recv().expect("reply")
    }

    /// Enqueues a deployment and returns without waiting for it.
    pub fn deploy_async(&self, id: &str) -> Receiver<DeploymentOutcome> {
        self.ask(|r| Command::Deploy(id.to_string(), r))
    }

    pub fn deploy(&self, id: &str) -> DeploymentOutcome {
        self.deploy_async(id).recv().expect("reply")
    }

    pub fn release(&self, deployment_id: &str) -> Result<bool, AiPlaneError> {
        self.ask(|r| Command::Release(deployment_id.to_string(), r)).recv().expect("reply")
    }

    pub fn status(&self, deployment_id: &str) -> Result<Deployment, AiPlaneError> {
        self.ask(|r| Command::Status(deployment_id.to_string(), r)).recv().expect("reply")
    }

    pub fn pool(&self) -> ResourcePool {
        self.ask(Command::Pool).recv().expect("reply")
    }

    pub fn events(&self) -> Vec<DeploymentEvent> {
        self.ask(Command::Events).recv().expect("reply")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aiplane::{DeploymentState, Preconditions, Resources};
    use crate::clock::Clock;

    #[test]
    fn concurrent_clients_are_serialized() {
        let pool = ResourcePool::new(Resources { gpu_flops: 100, gpu_mem: 100, mem: 100, cpu_cores: 100 });
        let svc = PlaneService::spawn(AiPlane::new(pool, Clock::logical(0)));
        let h = svc.handle();
        h.register(PipelineManifest::linear("p", Preconditions { min_mem: 10, ..Default::default() })).unwrap();

        let outcomes: Vec<DeploymentOutcome> = std::thread::scope(|s| {
            let joins: Vec<_> = (0..16).map(|_| {
                let h = h.clone();
                s.spawn(move || h.deploy("p"))
            }).collect();
            joins.into_iter().map(|j| j.join().unwrap()).collect()
        });
        let running = outcomes.iter().filter(|o| o.state == DeploymentState::Running).count();
        assert_eq!(running, 10);
        assert!(h.pool().is_conserved());

        // The global log interleaves nothing: each deployment's events are contiguous.
        let events = h.events();
        let mut seen = std::collections::BTreeSet::new();
        let mut last = String::new();
        for e in &events {
            if e.deployment_id != last {
                assert!(seen.insert(e.deployment_id.clone()), "{} resumed later", e.deployment_id);
                last = e.deployment_id.clone();
            }
        }
        assert!(events.windows(2).all(|w| w[0].ts < w[1].ts));
        let plane = svc.shutdown();
        assert_eq!(plane.deployments.len(), 16);
    }
}
