"""
Shared pass/fail bookkeeping for the standalone acceptance scripts.
"""
import os
import sys
import time
from pathlib import Path

import django

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'phenodesk.settings')
os.environ.setdefault('PHENODESK_RECORD_RUNS', 'False')
django.setup()


class AcceptanceTester:
    """Record and print acceptance checks"""

    def __init__(self, title):
        self.title = title
        self.passed = []
        self.failed = []
        self.started = time.monotonic()

    def section(self, heading):
        print("\n" + "=" * 60)
        print(heading)
        print("=" * 60)

    def test(self, name, condition, expected, actual):
        """Record test result"""
        if condition:
            self.passed.append(name)
            print(f"✅ {name}")
        else:
            self.failed.append(name)
            print(f"❌ {name}")
            print(f"   Expected: {expected}")
            print(f"   Actual: {actual}")

    def within_budget(self, minutes):
        elapsed = (time.monotonic() - self.started) / 60.0
        self.test(f"runtime under {minutes} min", elapsed < minutes, f"< {minutes} min", f"{elapsed:.1f} min")

    def print_summary(self):
        """Print test summary"""
        print("\n" + "=" * 60)
        print(f"{self.title} - SUMMARY")
        print("=" * 60)
        print(f"✅ Passed: {len(self.passed)} tests")
        print(f"❌ Failed: {len(self.failed)} tests")

        if self.failed:
            print("\nFailed tests:")
            for test_name in self.failed:
                print(f"  - {test_name}")
            return False
        print("\n🎉 ALL CHECKS PASSED")
        return True

    def finish(self):
        sys.exit(0 if self.print_summary() else 1)
