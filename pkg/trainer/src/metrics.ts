/**
 * Shared metrics-file schema (JSON). Must stay byte-compatible with the
 * pipeline's validator so either side can read the other's output.
 */

import { writeFileSync } from 'node:fs';
import { z } from 'zod';

export const METRICS_VERSION = 1;

export const AUG_MODES = [
  'none',
  'all',
  'thickness-only',
  'noise-only',
  'stretch-only',
  'mixed',
] as const;

const accuracy = z.number().min(0).max(1);

export const metricsSchema = z
  .object({
    metrics_version: z.literal(METRICS_VERSION),
    model_name: z.string().min(1),
    augmentation_mode: z.enum(AUG_MODES),
    train_acc: accuracy,
    val_acc: accuracy,
    test_acc: accuracy,
    writer_count: z.number().int().min(1),
    sample_counts: z
      .object({
        train: z.number().int().min(0),
        val: z.number().int().min(0),
        test: z.number().int().min(0),
      })
      .strict(),
    cmc: z.array(z.number().min(0).max(1 + 1e-9)),
    lr_trace: z.array(z.number()).optional(),
    loss_trace: z.array(z.number()).optional(),
    config: z.record(z.unknown()).optional(),
    notes: z.string().optional(),
  })
  .strict()
  .superRefine((data, ctx) => {
    if (data.cmc.length !== data.writer_count) {
      ctx.addIssue({
        code: z.ZodIssueCode.custom,
        message: `cmc must have writer_count entries (${data.writer_count}), got ${data.cmc.length}`,
        path: ['cmc'],
      });
    }
    for (let i = 1; i < data.cmc.length; i++) {
      if (data.cmc[i]! < data.cmc[i - 1]! - 1e-9) {
        ctx.addIssue({
          code: z.ZodIssueCode.custom,
          message: `cmc must be nondecreasing (violated at rank ${i + 1})`,
          path: ['cmc', i],
        });
        break;
      }
    }
    const last = data.cmc[data.cmc.length - 1];
    if (last !== undefined && Math.abs(last - 1.0) > 1e-9) {
      ctx.addIssue({
        code: z.ZodIssueCode.custom,
        message: `cmc must end at 1.0, got ${last}`,
        path: ['cmc'],
      });
    }
  });

export type Metrics = z.infer<typeof metricsSchema>;

export function validateMetrics(data: unknown): Metrics {
  const result = metricsSchema.safeParse(data);
  if (!result.success) {
    const issue = result.error.issues[0]!;
    const where = issue.path.length > 0 ? ` at ${issue.path.join('.')}` : '';
    throw new Error(`invalid metrics${where}: ${issue.message}`);
  }
  return result.data;
}

export function writeMetrics(data: Metrics, path: string): void {
  validateMetrics(data);
  writeFileSync(path, JSON.stringify(data, null, 2) + '\n', 'utf-8');
}
