#!/usr/bin/env node
/** Command-line entry point for the feature-statistics exporter. */

import * as fs from "fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { DEFAULT_LAYERS, extractStats } from "./features";
import { encodeFstats, imageSha256 } from "./fstats";
import { decodePng } from "./png";

export function exportFeatures(
  imagePath: string,
  outPath: string,
  layers: string[],
  backbone: string,
): void {
  if (backbone === "vgg19") {
    throw new Error(
      "vgg19 backbone weights are not bundled; download imagenet weights " +
        "(e.g. via `npm run fetch-weights -- vgg19`, network required) and " +
        "re-run with --weights pointing at the saved model",
    );
  }
  if (backbone !== "builtin") {
    throw new Error(`unknown backbone ${JSON.stringify(backbone)}`);
  }
  const image = decodePng(fs.readFileSync(imagePath));
  const stats = extractStats(image, layers);
  fs.writeFileSync(outPath, encodeFstats(stats, imageSha256(image)));
}

export function main(argv: string[]): void {
  yargs(argv)
    .command(
      "export-features",
      "Export per-layer feature statistics of an image as a .fstats file",
      (cmd) =>
        cmd
          .option("image", {
            type: "string",
            demandOption: true,
            describe: "Input image (PNG)",
          })
          .option("out", {
            type: "string",
            demandOption: true,
            describe: "Output .fstats path",
          })
          .option("layers", {
            type: "string",
            default: DEFAULT_LAYERS.join(","),
            describe: "Comma-separated layer names",
          })
          .option("backbone", {
            type: "string",
            default: "builtin",
            choices: ["builtin", "vgg19"],
            describe: "Feature extractor",
          }),
      (args) => {
        exportFeatures(
          args.image,
          args.out,
          args.layers.split(",").map((s) => s.trim()).filter(Boolean),
          args.backbone,
        );
      },
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      process.stderr.write(`${err ? err.message : msg}\n`);
      process.exit(err ? 1 : 2);
    })
    .parseSync();
}

if (require.main === module) {
  main(hideBin(process.argv));
}
