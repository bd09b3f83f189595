/**
 * Harness CLI.
 *
 * Usage:
 *   node dist/cli.js run --dataset mnist --init grassmannian --codebook cb.gpk
 *   node dist/cli.js sweep --dataset mnist --inits baseline,grassmannian --seeds 0,1,2
 *   node dist/cli.js fetch-data --dataset kmnist
 */

import { DatasetName, DatasetUnavailable, fetchDataset } from "./data.js";
import { ExperimentConfig, ModelKind, OptimizerName, runExperiment } from "./experiment.js";
import { InitMode } from "./model.js";
import { writeAccuracyStripPlot } from "./plot.js";
import { expandMatrix, runSweep, summarize, writeSummaryCsv } from "./sweep.js";

const HELP = `grasspack-harness commands:

  run         single training run
    --dataset mnist|kmnist|cifar10|cifar100|synthetic   (default mnist)
    --model shallow|resnet18    (default shallow; resnet18 wants a 7x7 G(49,k) codebook)
    --init baseline|grassmannian|grassmannian-frozen|grassmannian-kaiming
    --codebook <path>       codebook file (required unless baseline)
    --optimizer sgd|adam|adadelta   (default sgd)
    --decay <x>             weight decay (default 0)
    --seed <n>              (default 0)
    --epochs <n>            (default 1)
    --batch <n>             (default 64)
    --limit-train <n> --limit-test <n>
    --backend wasm|cpu      (default wasm)
    --data-dir <dir>        (default $GRASSPACK_DATA or ./data)
    --ledger <csv>          append the run row here
    --stats <csv>           per-epoch first-layer kernel stats

  sweep       config matrix; one ledger row per run
    --dataset / --datasets a,b    --inits a,b    --optimizers a,b
    --decays 0,0.0001             --seeds 0,1,2
    plus the run options; also --summary <csv> and --plot <png>

  fetch-data  download a dataset into the data directory
    --dataset mnist|kmnist        --data-dir <dir>
`;

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    if (!argv[i].startsWith("--")) continue;
    const key = argv[i].slice(2);
    const next = argv[i + 1];
    if (next !== undefined && !next.startsWith("--")) {
      out.set(key, next);
      i++;
    } else {
      out.set(key, "true");
    }
  }
  return out;
}

function list(value: string | undefined, fallback: string[]): string[] {
  if (!value) return fallback;
  return value.split(",").map((s) => s.trim()).filter(Boolean);
}

function baseConfig(args: Map<string, string>): ExperimentConfig {
  return {
    dataset: (args.get("dataset") ?? "mnist") as DatasetName,
    model: (args.get("model") as ModelKind) ?? undefined,
    initMode: (args.get("init") ?? "baseline") as InitMode,
    optimizer: (args.get("optimizer") ?? "sgd") as OptimizerName,
    weightDecay: Number(args.get("decay") ?? 0),
    seed: Number(args.get("seed") ?? 0),
    epochs: Number(args.get("epochs") ?? 1),
    batchSize: Number(args.get("batch") ?? 64),
    codebookPath: args.get("codebook"),
    dataDir: args.get("data-dir"),
    limitTrain: Number(args.get("limit-train") ?? 0) || undefined,
    limitTest: Number(args.get("limit-test") ?? 0) || undefined,
    syntheticSize: Number(args.get("synthetic-size") ?? 0) || undefined,
    syntheticChannels: Number(args.get("synthetic-channels") ?? 0) || undefined,
    backend: (args.get("backend") as "wasm" | "cpu") ?? undefined,
    ledgerPath: args.get("ledger"),
    statsPath: args.get("stats"),
  };
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  const args = parseArgs(rest);
  try {
    switch (command) {
      case "run": {
        const config = baseConfig(args);
        const result = await runExperiment(config);
        console.log(
          `first-epoch accuracy ${result.firstEpochAccuracy.toFixed(2)}% ` +
            `final ${result.finalAccuracy.toFixed(2)}% ` +
            `(${result.wallClockSeconds.toFixed(1)}s)`,
        );
        return 0;
      }
      case "sweep": {
        const base = baseConfig(args);
        const configs = expandMatrix({
          datasets: list(args.get("datasets") ?? args.get("dataset"), ["mnist"]) as DatasetName[],
          initModes: list(args.get("inits"), [base.initMode]) as InitMode[],
          optimizers: list(args.get("optimizers"), [base.optimizer]) as OptimizerName[],
          weightDecays: list(args.get("decays"), [String(base.weightDecay)]).map(Number),
          seeds: list(args.get("seeds"), [String(base.seed)]).map(Number),
          epochs: base.epochs,
          batchSize: base.batchSize,
          codebookPath: base.codebookPath,
          dataDir: base.dataDir,
          limitTrain: base.limitTrain,
          limitTest: base.limitTest,
          backend: base.backend,
        });
        const ledger = args.get("ledger") ?? "sweep_ledger.csv";
        const rows = await runSweep(configs, ledger);
        const summary = summarize(rows);
        for (const g of summary) {
          console.log(
            `${g.dataset} ${g.initMode} ${g.optimizer} decay=${g.weightDecay}: ` +
              `first-epoch ${g.meanFirstEpoch.toFixed(2)} ` +
              `+/- ${g.stdFirstEpoch.toFixed(2)} over ${g.runs} runs`,
          );
        }
        const summaryPath = args.get("summary");
        if (summaryPath) writeSummaryCsv(summaryPath, summary);
        const plotPath = args.get("plot");
        if (plotPath && rows.some((r) => r.firstEpochAccuracy !== null)) {
          writeAccuracyStripPlot(plotPath, rows);
          console.log(`plot: ${plotPath}`);
        }
        const failures = rows.filter((r) => r.error).length;
        if (failures) console.error(`${failures}/${rows.length} runs failed`);
        console.log(`ledger: ${ledger} (${rows.length} rows)`);
        return 0;
      }
      case "fetch-data": {
        const dataset = (args.get("dataset") ?? "mnist") as DatasetName;
        await fetchDataset(dataset, args.get("data-dir"));
        console.log(`${dataset}: ready`);
        return 0;
      }
      case "help":
      case undefined:
        console.log(HELP);
        return command ? 0 : 1;
      default:
        console.error(`unknown command ${command}\n${HELP}`);
        return 1;
    }
  } catch (err) {
    if (err instanceof DatasetUnavailable) {
      console.error(`error: DatasetUnavailable: ${err.message}`);
      return 2;
    }
    const message = err instanceof Error ? `${err.name}: ${err.message}` : String(err);
    console.error(`error: ${message}`);
    return 2;
  }
}

main().then((code) => {
  process.exitCode = code;
});
