"""
Compare a predictions CSV to a labels CSV.

    python manage.py eval --config c.json --out DIR [--xlsx]
"""

from core.commands import PipelineCommand
from core.exceptions import DataError
from imaging.labels import read_labels
from metrics.evaluation import MetricsReport, pairs_from
from reports.utils import export_table_xlsx, metrics_sheet


class Command(PipelineCommand):
    help = 'MAD, SDAD and %D of data.predictions_csv against data.labels_csv (column data.target)'

    def add_command_arguments(self, parser):
        parser.add_argument('--xlsx', action='store_true', help='Also write <out>/eval.xlsx')

    def run(self, cfg, out, options):
        target = cfg.data.target
        predictions = read_labels(self.require(cfg.data, 'predictions_csv'), target, as_float=True,
                                  clamp_negative=True)
        labels = read_labels(self.require(cfg.data, 'labels_csv'), target, as_float=True)

        matched = sorted(set(predictions) & set(labels))
        if not matched:
            raise DataError("no plot ids shared by the predictions and labels")
        unmatched = sorted(set(predictions) ^ set(labels))
        if unmatched:
            self.stdout.write(self.style.WARNING(f"  {len(unmatched)} plot ids without a partner ignored"))

        pairs = pairs_from([predictions[i] for i in matched], [labels[i] for i in matched])
        metrics = MetricsReport.for_pairs(pairs).to_dict()
        self.stdout.write(f"  n={metrics['n']} mad={metrics['mad']} sdad={metrics['sdad']} "
                          f"pct_diff={metrics['pct_diff']}")

        results = {'target': target, 'metrics': metrics, 'unmatched': unmatched}
        if options.get('xlsx'):
            pair_rows = [(i, predictions[i], labels[i], abs(predictions[i] - labels[i])) for i in matched]
            path = export_table_xlsx(out / 'eval.xlsx', [
                metrics_sheet({'metrics': metrics}),
                ('Pairs', ('plot_id', 'predicted', 'target', 'abs_diff'), pair_rows),
            ])
            results['xlsx'] = str(path)
        return results
