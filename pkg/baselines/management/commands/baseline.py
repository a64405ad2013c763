"""
Height-feature + MLR biomass baseline.

    python manage.py baseline --config c.json --out DIR [--xlsx]
"""

import numpy as np

from core.commands import PipelineCommand
from core.exceptions import DataError
from core.rng import split_holdout
from baselines.features import drop_redundant_columns, height_features, write_feature_csv
from baselines.regression import mlr_fit, mlr_predict, vector_angle
from metrics.evaluation import MetricsReport, pairs_from
from phenopipe.records import load_records
from reports.utils import export_table_xlsx, metrics_sheet


class Command(PipelineCommand):
    help = 'Fit height features to biomass on the train split; report held-out metrics'

    def add_command_arguments(self, parser):
        parser.add_argument('--xlsx', action='store_true', help='Also write <out>/features.xlsx')

    def run(self, cfg, out, options):
        records = load_records(self.require(cfg.data, 'plots_dir'),
                               self.require(cfg.data, 'labels_csv'), require_labels=True)
        records = [record for record in records if record.biomass is not None]
        if len(records) < 3:
            raise DataError("need at least 3 plots with biomass labels")

        plot_ids = [record.plot_id for record in records]
        rasters = [record.raster() for record in records]
        features = [height_features(raster, cfg.features) for raster in rasters]
        targets = np.array([record.biomass for record in records])
        X, names = write_feature_csv(out / 'features.csv', plot_ids, features, targets)

        train_ids, holdout_ids = split_holdout(plot_ids, cfg.data.holdout_fraction)
        train = np.isin(plot_ids, train_ids)
        X_used, used = drop_redundant_columns(X[train], names)
        keep = [names.index(name) for name in used]
        model = mlr_fit(X_used, targets[train], used)

        holdout = ~train
        predicted = np.maximum(mlr_predict(model, X[holdout][:, keep]), 0.0)
        metrics = MetricsReport.for_pairs(pairs_from(predicted, targets[holdout])).to_dict()
        height_sums = [float(raster.channel('H').sum(dtype=np.float64)) for raster in rasters]
        angle = vector_angle(height_sums, targets)
        self.stdout.write(f"  held-out pct_diff={metrics['pct_diff']} angle={angle:.3f} deg")

        results = {
            'features_csv': str(out / 'features.csv'),
            'model': model.to_dict(),
            'dropped_features': [name for name in names if name not in used],
            'holdout_plots': list(holdout_ids),
            'holdout': metrics,
            'height_sum_angle_deg': angle,
        }
        if options.get('xlsx'):
            rows = [[plot_id] + X[i].tolist() + [float(targets[i])] for i, plot_id in enumerate(plot_ids)]
            path = export_table_xlsx(out / 'features.xlsx', [
                ('Features', ['plot_id'] + names + ['biomass'], rows),
                metrics_sheet({'holdout': metrics}),
            ])
            results['xlsx'] = str(path)
        return results
