/** Step learning-rate schedule: decay by `gamma` every `step` epochs. */

export interface ScheduleConfig {
  learningRate: number;
  lrStep: number;
  lrGamma: number;
  maxEpochs: number;
}

/** Learning rate for a 1-based epoch number. Epochs 1..step use the base
 * rate, epochs step+1..2*step one decay, and so on.
 *
 * The product is rounded to 12 significant digits so the schedule is exact
 * in decimal terms: two 0.1 decays of 1e-4 give exactly 1e-6, not the
 * 1.0000000000000002e-6 of raw binary arithmetic.
 */
export function lrForEpoch(epoch: number, cfg: ScheduleConfig): number {
  if (epoch < 1 || !Number.isInteger(epoch)) {
    throw new Error(`epoch must be a positive integer, got ${epoch}`);
  }
  const decays = Math.floor((epoch - 1) / cfg.lrStep);
  return Number((cfg.learningRate * Math.pow(cfg.lrGamma, decays)).toPrecision(12));
}

/** Per-epoch learning rates for the whole run, index 0 = epoch 1. */
export function lrTrace(cfg: ScheduleConfig): number[] {
  return Array.from({ length: cfg.maxEpochs }, (_, i) => lrForEpoch(i + 1, cfg));
}
