"""
Predict plot biomass with a trained model.

    python manage.py predict-biomass --config c.json --out DIR
"""

from core.commands import PipelineCommand
from imaging.labels import read_labels, write_labels
from metrics.evaluation import MetricsReport, pairs_from
from netblocks.modelio import load_model
from phenopipe.biomass import predict_biomass
from phenopipe.records import load_records


class Command(PipelineCommand):
    help = 'Write <out>/biomass_predictions.csv; scores them when data.labels_csv is set'

    def run(self, cfg, out, options):
        params = load_model(self.require(cfg.data, 'biomass_model'))
        records = load_records(self.require(cfg.data, 'plots_dir'))
        predictions = {record.plot_id: predict_biomass(record.raster(), params) for record in records}

        path = out / 'biomass_predictions.csv'
        write_labels(path, [{'plot_id': plot_id, 'biomass': repr(value)} for plot_id, value in predictions.items()],
                     columns=('plot_id', 'biomass'))
        self.stdout.write(f"  {len(predictions)} predictions written to {path}")

        metrics = None
        if cfg.data.labels_csv:
            truth = read_labels(cfg.data.labels_csv, 'biomass')
            scored = [plot_id for plot_id in predictions if plot_id in truth]
            if scored:
                pairs = pairs_from([predictions[i] for i in scored], [truth[i] for i in scored])
                metrics = MetricsReport.for_pairs(pairs).to_dict()
        return {
            'predictions_csv': str(path),
            'channels': params.meta.get('channels'),
            'predictions': predictions,
            'metrics': metrics,
        }
