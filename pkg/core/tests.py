import numpy as np
from django.test import SimpleTestCase

from .exceptions import ConfigError, NumericalInstability, ParameterError
from .formats import fixed
from .seeding import stream


class SeedingTests(SimpleTestCase):

    def test_streams_are_reproducible(self):
        np.testing.assert_array_equal(stream(7, 3, 1).random(5), stream(7, 3, 1).random(5))

    def test_indices_give_independent_streams(self):
        self.assertFalse(np.array_equal(stream(7, 3, 1).random(5), stream(7, 3, 2).random(5)))
        self.assertFalse(np.array_equal(stream(7, 3).random(5), stream(8, 3).random(5)))


class FixedFormatTests(SimpleTestCase):

    def test_numbers(self):
        self.assertEqual(fixed(0.5), '0.5')
        self.assertEqual(fixed(2.0), '2')
        self.assertEqual(fixed(1 / 3), '0.333333333333')
        self.assertEqual(fixed(1 / 3, digits=4), '0.3333')
        self.assertEqual(fixed(1e-5), '0.00001')

    def test_integers_and_flags(self):
        self.assertEqual(fixed(3), '3')
        self.assertEqual(fixed(np.int64(12)), '12')
        self.assertEqual(fixed(True), 'true')
        self.assertEqual(fixed(np.bool_(False)), 'false')


class ExceptionTests(SimpleTestCase):

    def test_config_error_lists_every_entry(self):
        error = ConfigError([('model.tau', 4, 'tau must lie in (0, 1), got 1.2'), ('n_list', None, 'required')])
        self.assertEqual(str(error), 'model.tau: tau must lie in (0, 1), got 1.2 (line 4)\nn_list: required')

    def test_parameter_error_is_a_value_error(self):
        self.assertTrue(issubclass(ParameterError, ValueError))

    def test_instability_keeps_the_step(self):
        self.assertEqual(NumericalInstability('blew up', step=12).step, 12)
