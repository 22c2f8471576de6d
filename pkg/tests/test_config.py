#!/usr/bin/env python3
"""
Unit tests for configuration loading
"""

import json
import os
import sys
import tempfile
import unittest

# Add project root to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from reliable_slicing.errors import ConfigurationError
from reliable_slicing.utils.config import (DEFAULT_CONFIG, ExperimentConfig, load_config,
                                           save_config)


class TestConfig(unittest.TestCase):
    """Test cases for configuration loading and validation"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, content: str) -> str:
        path = os.path.join(self.tmp.name, 'config.json')
        with open(path, 'w', encoding='utf-8') as f:
            f.write(content)
        return path

    def test_defaults(self):
        config = load_config(None)
        env, agent, rep = config.environment, config.agent, config.reputation

        self.assertEqual(env.capacity, 1.6e9)
        self.assertEqual(env.min_alloc, 1e7)
        self.assertEqual(env.arrival_rate, 1000.0)
        self.assertEqual((env.size_min, env.size_max), (1000.0, 10000.0))
        self.assertEqual((env.kappa_sp, env.kappa_bc), (330.0, 330.0))
        self.assertEqual((env.header_bytes, env.per_request_block_bytes), (500.0, 50.0))
        self.assertEqual(env.inter_bs_rate, 10e9)

        self.assertEqual((agent.gamma_r, agent.gamma_c, agent.eps_max), (0.95, 0.95, 0.02))
        self.assertEqual((agent.lr_reward_critic, agent.lr_cost_critic, agent.lr_actor), (5e-4, 5e-4, 2e-4))
        self.assertEqual(agent.lr_dual, 0.1)
        self.assertEqual(agent.batch_size, 512)
        self.assertEqual(agent.buffer_capacity, 100_000)
        self.assertEqual(agent.soft_update_rate, 0.005)

        self.assertEqual(rep.num_bs, 10)
        self.assertEqual(rep.feedback_weight, 0.2)
        self.assertEqual((rep.history_window, rep.history_decay), (10, 0.1))
        self.assertEqual((rep.committee_threshold, rep.committee_size), (0.8, 4))

        self.assertEqual([p.bs_id for p in config.attacks], [0, 1, 2])
        self.assertEqual([p.name for p in config.reputation_profiles], ['p000', 'p025', 'p050', 'dynamic'])
        self.assertEqual(config.experiment.matched_seeds, (0, 1, 2))

    def test_empty_file_gives_defaults(self):
        self.assertEqual(load_config(self._write('')), ExperimentConfig())
        self.assertEqual(load_config(self._write('{}')), ExperimentConfig())

    def test_partial_override(self):
        config = load_config(self._write(json.dumps({'agent': {'episodes': 3, 'lr_dual': 1}})))
        self.assertEqual(config.agent.episodes, 3)
        self.assertEqual(config.agent.lr_dual, 1.0)
        self.assertIsInstance(config.agent.lr_dual, float)
        self.assertEqual(config.agent.batch_size, 512)

    def test_unknown_key(self):
        with self.assertRaises(ConfigurationError) as ctx:
            load_config(self._write(json.dumps({'agent': {'gama_c': 0.9}})))
        self.assertEqual(ctx.exception.key, 'agent.gama_c')
        with self.assertRaises(ConfigurationError) as ctx:
            load_config(self._write(json.dumps({'plots': {}})))
        self.assertEqual(ctx.exception.key, 'plots')

    def test_out_of_range(self):
        with self.assertRaises(ConfigurationError) as ctx:
            load_config(self._write(json.dumps({'agent': {'gamma_c': 1.2}})))
        self.assertEqual(ctx.exception.key, 'agent.gamma_c')

    def test_wrong_type(self):
        with self.assertRaises(ConfigurationError) as ctx:
            load_config(self._write(json.dumps({'environment': {'capacity': 'lots'}})))
        self.assertEqual(ctx.exception.key, 'environment.capacity')
        with self.assertRaises(ConfigurationError):
            load_config(self._write(json.dumps({'experiment': {'trace': 1}})))

    def test_missing_and_malformed_file(self):
        with self.assertRaises(ConfigurationError) as ctx:
            load_config(os.path.join(self.tmp.name, 'absent.json'))
        self.assertEqual(ctx.exception.key, 'config')
        with self.assertRaises(ConfigurationError):
            load_config(self._write('{"agent": '))

    def test_attack_ids_checked(self):
        data = {'attacks': [{'bs_id': 10, 'schedule': [{'from_slot': 0, 'prob': 0.5}]}]}
        with self.assertRaises(ConfigurationError) as ctx:
            load_config(self._write(json.dumps(data)))
        self.assertEqual(ctx.exception.key, 'attacks[0].bs_id')

    def test_duplicate_profile_names(self):
        profile = {'bs_id': 0, 'name': 'same', 'schedule': [{'from_slot': 0, 'prob': 0.1}]}
        with self.assertRaises(ConfigurationError):
            load_config(self._write(json.dumps({'reputation_profiles': [profile, profile]})))

    def test_overrides(self):
        config = load_config(None).with_overrides(seed=7, output_dir='elsewhere')
        self.assertEqual(config.experiment.seed, 7)
        self.assertEqual(config.experiment.output_dir, 'elsewhere')
        with self.assertRaises(ConfigurationError):
            load_config(None).with_overrides(seed=-1)

    def test_save_load_round_trip(self):
        config = load_config(self._write(json.dumps({'agent': {'episodes': 4},
                                                     'experiment': {'matched_seeds': [5, 6]}})))
        path = save_config(config, os.path.join(self.tmp.name, 'saved', 'config.json'))
        self.assertEqual(load_config(path), config)

    def test_default_config_dict(self):
        self.assertEqual(ExperimentConfig.from_dict(json.loads(json.dumps(DEFAULT_CONFIG))), ExperimentConfig())
        self.assertEqual(set(DEFAULT_CONFIG),
                         {'environment', 'agent', 'reputation', 'attacks', 'reputation_profiles', 'experiment'})


if __name__ == '__main__':
    unittest.main()
