"""
Train the emergence counter on a labelled patch set.

    python manage.py train-count --config c.json --out DIR
"""

import numpy as np

from core.commands import PipelineCommand
from core.exceptions import DataError
from core.rng import split_holdout
from metrics.evaluation import MetricsReport, pairs_from
from netblocks.modelio import save_model
from phenopipe.counting import count_patches, read_patch_set, train_counter


class Command(PipelineCommand):
    help = 'Train the emergence counter; writes counter.dwmp and held-out patch metrics'

    def run(self, cfg, out, options):
        patches = read_patch_set(self.require(cfg.data, 'patches_dir'))
        plot_ids = sorted({patch.plot_id for patch in patches})
        if len(plot_ids) < 2:
            raise DataError("need patches from at least 2 plots to hold some out")
        train_ids, holdout_ids = split_holdout(plot_ids, cfg.data.holdout_fraction)
        train = [patch for patch in patches if patch.plot_id in set(train_ids)]
        holdout = [patch for patch in patches if patch.plot_id in set(holdout_ids)]
        self.stdout.write(f"Training counter on {len(train)} patches ({len(holdout)} held out)")

        train_cfg = cfg.optimizer.apply(cfg.train.counter)
        params, log = train_counter(train, train_cfg, cfg.models.counter, cfg.seed)
        model_path = out / 'counter.dwmp'
        save_model(model_path, params)
        self.log_epochs(log)

        results = {
            'model': str(model_path),
            'train_patches': len(train),
            'holdout_patches': len(holdout),
            'loss_log': log,
            'holdout': None,
            'mean_predictor': None,
        }
        if holdout:
            targets = [patch.count for patch in holdout]
            predicted = np.maximum(count_patches(holdout, params), 0.0)
            mean_count = float(np.mean([patch.count for patch in train]))
            results['holdout'] = MetricsReport.for_pairs(pairs_from(predicted, targets)).to_dict()
            results['mean_predictor'] = MetricsReport.for_pairs(
                pairs_from([mean_count] * len(targets), targets)).to_dict()
        return results
