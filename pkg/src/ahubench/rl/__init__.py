"""Reinforcement-learning core: environment, policy, PPO trainer."""
