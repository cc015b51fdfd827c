/** Command-line front end; flags mirror TrainConfig one for one. */

import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { MODEL_NAMES, ModelName } from './model.js';
import { TRAIN_DEFAULTS, TrainConfig, train } from './train.js';

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .scriptName('inkline-trainer')
    .usage('$0 --manifest <file> --out <metrics.json> [options]')
    .option('manifest', { type: 'string', demandOption: true, describe: 'Pipeline manifest (TSV)' })
    .option('out', { type: 'string', demandOption: true, describe: 'Metrics output path (JSON)' })
    .option('model', {
      type: 'string',
      choices: MODEL_NAMES as unknown as string[],
      default: TRAIN_DEFAULTS.model as string,
    })
    .option('batch-size', { type: 'number', default: TRAIN_DEFAULTS.batchSize })
    .option('max-epochs', { type: 'number', default: TRAIN_DEFAULTS.maxEpochs })
    .option('learning-rate', { type: 'number', default: TRAIN_DEFAULTS.learningRate })
    .option('lr-step', { type: 'number', default: TRAIN_DEFAULTS.lrStep })
    .option('lr-gamma', { type: 'number', default: TRAIN_DEFAULTS.lrGamma })
    .option('seed', { type: 'number', default: TRAIN_DEFAULTS.seed })
    .option('freeze-backbone', { type: 'boolean', default: TRAIN_DEFAULTS.freezeBackbone })
    .strict()
    .fail((msg, err) => {
      throw err ?? new Error(msg);
    })
    .parse();

  const cfg: TrainConfig = {
    model: args.model as ModelName,
    batchSize: args['batch-size'],
    maxEpochs: args['max-epochs'],
    learningRate: args['learning-rate'],
    lrStep: args['lr-step'],
    lrGamma: args['lr-gamma'],
    seed: args.seed,
    freezeBackbone: args['freeze-backbone'],
    manifestPath: args.manifest,
    outMetricsPath: args.out,
  };
  const { metrics } = await train(cfg);
  console.error(
    `trained ${metrics.model_name}: ` +
      `train ${metrics.train_acc.toFixed(4)} val ${metrics.val_acc.toFixed(4)} ` +
      `test ${metrics.test_acc.toFixed(4)}, metrics at ${cfg.outMetricsPath}`,
  );
  return 0;
}

const isDirectRun =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split('/').pop()!);
if (isDirectRun) {
  main(hideBin(process.argv))
    .then((code) => process.exit(code))
    .catch((err) => {
      console.error(`error: ${err instanceof Error ? err.message : err}`);
      process.exit(1);
    });
}
