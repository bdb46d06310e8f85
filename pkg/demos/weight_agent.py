"""
The loss-weight agent on a toy reward
-------------------------------------

The agent proposes three weights in [0.01, 1]. Here the reward is just
the negative squared distance to (0.7, 0.3, 0.5), with a fixed state, so
we can watch the actor-critic pair climb towards it.
"""

import numpy as np

from eegdiff.agent import AgentConfig, Transition, WeightAgent, select_action

best = np.array([0.7, 0.3, 0.5])
state = np.random.default_rng(0).standard_normal(32)
agent = WeightAgent(32, AgentConfig(actor_lr=1e-2, critic_lr=0.3, updates_per_epoch=20, noise_std=0.2,
                                    noise_decay=1.0, sigma=0.05, buffer_capacity=50), seed=0)

for epoch in range(60):
    rewards = []
    for i in range(5):
        a = agent.act(state, epoch, np.random.default_rng([epoch, i]))
        r = -float(np.sum((a.as_array() - best) ** 2))
        agent.observe(Transition(state, a, r, state))
        rewards.append(r)
    agent.update(np.random.default_rng([epoch, 99]))
    if epoch % 10 == 0 or epoch == 59:
        greedy = select_action(agent.actor, state, 0.0, 0)
        print(f"epoch {epoch:2d}  mean reward {np.mean(rewards):.4f}  greedy weights {np.round(greedy.as_array(), 3)}")
