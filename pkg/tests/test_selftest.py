import unittest

from src.oracles.selftest import SelfTest, run_selftest


class TestSelfTest(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.results = run_selftest(seed=0)

    def test_all_checks_pass(self):
        """Test every built-in check passes"""
        failed = [(r.name, r.detail) for r in self.results if not r.passed]
        self.assertEqual(failed, [])

    def test_check_names(self):
        """Test the check list is stable"""
        self.assertEqual(len(self.results), 16)
        names = [r.name for r in self.results]
        self.assertEqual(len(set(names)), 16)
        self.assertIn("contour projection", names)

    def test_other_seed(self):
        """Test the randomized checks under another seed"""
        suite = SelfTest(seed=11)
        passed, detail = suite.check_ambiguity_random()
        self.assertTrue(passed, detail)
        passed, detail = suite.check_gram_phase()
        self.assertTrue(passed, detail)


if __name__ == '__main__':
    unittest.main()
