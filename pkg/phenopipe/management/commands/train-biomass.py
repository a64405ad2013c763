"""
Train the biomass regressor over a channel set.

    python manage.py train-biomass --config c.json --channels H --out DIR
"""

from core.commands import PipelineCommand
from core.exceptions import DataError
from metrics.evaluation import MetricsReport, pairs_from
from netblocks.modelio import save_model
from phenopipe.biomass import BiomassSample, predict_biomass, train_biomass
from phenopipe.records import load_records, split_records


class Command(PipelineCommand):
    help = 'Train the biomass network on labelled plots; writes biomass_<channels>.dwmp'

    def run(self, cfg, out, options):
        records = load_records(self.require(cfg.data, 'plots_dir'),
                               self.require(cfg.data, 'labels_csv'), require_labels=True)
        records = [record for record in records if record.biomass is not None]
        if len(records) < 2:
            raise DataError("need at least 2 plots with biomass labels")
        train, holdout = split_records(records, cfg.data.holdout_fraction)
        self.stdout.write(f"Training biomass ({cfg.channel_set}) on {len(train)} plots "
                          f"({len(holdout)} held out)")

        samples = [BiomassSample(r.plot_id, r.raster(), r.biomass) for r in train]
        train_cfg = cfg.optimizer.apply(cfg.train.biomass)
        params, log = train_biomass(samples, cfg.channels, train_cfg, cfg.models.biomass, cfg.rmrs, cfg.seed)
        model_path = out / f"biomass_{cfg.channel_set}.dwmp"
        save_model(model_path, params)
        self.log_epochs(log)

        predicted = [predict_biomass(record.raster(), params) for record in holdout]
        pairs = pairs_from(predicted, [record.biomass for record in holdout])
        return {
            'model': str(model_path),
            'channels': cfg.channel_set,
            'target_scale': params.meta['target_scale'],
            'pool_size': params.meta['pool_size'],
            'train_plots': [record.plot_id for record in train],
            'holdout_plots': [record.plot_id for record in holdout],
            'loss_log': log,
            'holdout': MetricsReport.for_pairs(pairs).to_dict(),
            'holdout_predictions': dict(zip([r.plot_id for r in holdout], predicted)),
        }
