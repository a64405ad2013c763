"""
Finite-difference gradient suite over every layer, block and loss.

    python manage.py gradcheck --config c.json --out DIR [--only conv2d,cnr]

Exits 3 when any case fails.
"""

from core.commands import PipelineCommand
from core.exceptions import GradientCheckError
from netblocks.gradsuite import run_gradient_suite


class Command(PipelineCommand):
    help = 'Check analytic gradients against central differences (exit 3 on failure)'

    def add_command_arguments(self, parser):
        parser.add_argument('--only', type=str, default=None,
                            help='Comma-separated case names to run (default: all)')

    def run(self, cfg, out, options):
        only = set(filter(None, (options.get('only') or '').split(','))) or None
        results = run_gradient_suite(cfg.gradcheck, only)
        failed = sorted(name for name, result in results.items() if not result['passed'])
        for name, result in sorted(results.items()):
            style = self.style.SUCCESS if result['passed'] else self.style.ERROR
            self.stdout.write(style(f"  {name:<24} max rel err {result['max_error']:.3e}"))
        if failed:
            raise GradientCheckError(f"gradient check failed for: {', '.join(failed)}")
        return {'cases': results, 'tolerance': cfg.gradcheck.tolerance}
