#!/usr/bin/env node
/**
 * Standalone helper for the scanner: interactive command builder,
 * environment assistance, and executable hashing. Runs on node
 * builtins alone; the scanner itself does not need to be installed.
 */

import { createInterface } from 'readline';
import { envAssist } from './env';
import { FileMissing, hashExecutable } from './hash';
import { buildCommand, WalkIO } from './steps';

const EXIT_OK = 0;
const EXIT_ERROR = 1;
const EXIT_USAGE = 2;
const EXIT_ABORT = 130;

const USAGE = `usage: helper <command>

commands:
  build         interactively assemble a scanner invocation
  env           report required environment variables (output is sourceable)
  hash <path>   print the SHA-256 digest of an executable
`;

function readlineIO(): { io: WalkIO; close: () => void } {
  // Answers are queued as they arrive so piped input works the same
  // as an interactive terminal (lines can land before ask() runs).
  const rl = createInterface({ input: process.stdin });
  const buffered: string[] = [];
  const waiting: Array<(value: string | null) => void> = [];
  let closed = false;
  rl.on('line', (line) => {
    const waiter = waiting.shift();
    if (waiter) waiter(line);
    else buffered.push(line);
  });
  rl.on('close', () => {
    closed = true;
    while (waiting.length) waiting.shift()!(null);
  });
  const io: WalkIO = {
    ask(question: string): Promise<string | null> {
      process.stdout.write(question);
      if (buffered.length) return Promise.resolve(buffered.shift()!);
      if (closed) return Promise.resolve(null);
      return new Promise((resolve) => waiting.push(resolve));
    },
    say(line: string): void {
      process.stdout.write(line + '\n');
    },
  };
  return { io, close: () => rl.close() };
}

async function runBuild(): Promise<number> {
  const { io, close } = readlineIO();
  try {
    const command = await buildCommand(io);
    if (command === null) {
      process.stderr.write('aborted; no command generated\n');
      return EXIT_ABORT;
    }
    io.say('');
    io.say('run this:');
    io.say(command);
    return EXIT_OK;
  } finally {
    close();
  }
}

async function main(argv: string[]): Promise<number> {
  const command = argv[0];
  if (command === 'build') {
    return runBuild();
  }
  if (command === 'env') {
    for (const line of envAssist()) {
      process.stdout.write(line + '\n');
    }
    return EXIT_OK;
  }
  if (command === 'hash') {
    const path = argv[1];
    if (!path) {
      process.stderr.write('hash: missing <path>\n');
      return EXIT_USAGE;
    }
    try {
      process.stdout.write(hashExecutable(path) + '\n');
      return EXIT_OK;
    } catch (err) {
      if (err instanceof FileMissing) {
        process.stderr.write(`hash: ${err.message}\n`);
        return EXIT_ERROR;
      }
      throw err;
    }
  }
  process.stderr.write(USAGE);
  return EXIT_USAGE;
}

main(process.argv.slice(2)).then(
  (code) => process.exit(code),
  (err) => {
    process.stderr.write(`internal error: ${err}\n`);
    process.exit(EXIT_ERROR);
  },
);
