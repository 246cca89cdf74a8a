/**
 * Command-line entry: load a model file and serve the scoring protocol on
 * stdin/stdout until the input closes.
 *
 *     node dist/cli.js --model PATH [--stats]
 *
 * --stats writes a one-line session summary to stderr at shutdown.
 * Exit codes: 0 served to end of input, 1 model failed to load, 2 usage.
 */
import { parseArgs } from "node:util";

import { ModelFileError, NgramModel } from "./model.js";
import { createSession, serve } from "./server.js";

const USAGE = "usage: node dist/cli.js --model PATH [--stats]";

async function main(argv: string[]): Promise<number> {
  let modelPath: string | undefined;
  let stats: boolean;
  try {
    const { values } = parseArgs({
      args: argv,
      options: {
        model: { type: "string" },
        stats: { type: "boolean", default: false },
      },
      allowPositionals: false,
    });
    modelPath = values.model;
    stats = values.stats ?? false;
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n${USAGE}\n`);
    return 2;
  }
  if (!modelPath) {
    process.stderr.write(`--model is required\n${USAGE}\n`);
    return 2;
  }

  let model: NgramModel;
  try {
    model = NgramModel.load(modelPath);
  } catch (err) {
    if (err instanceof ModelFileError) {
      process.stderr.write(`${err.message}\n`);
      return 1;
    }
    throw err;
  }

  const session = createSession(modelPath);
  await serve(process.stdin, process.stdout, model, session);
  if (stats) {
    process.stderr.write(
      `session: model=${session.model} device=${session.device} ` +
        `requests=${session.requestsHandled} tokens=${session.tokensScored}\n`,
    );
  }
  return 0;
}

process.exitCode = await main(process.argv.slice(2));
