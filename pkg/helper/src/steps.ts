/**
 * Interactive command builder: prompt steps with chained dependencies.
 *
 * Each step is asked only when its dependencies' answers match, is
 * re-asked (with the reason printed) until its validator passes, and
 * contributes tokens to one final copy-pasteable scanner invocation.
 * The NOEXIT flag is intentionally never offered here.
 */

import { existsSync } from 'fs';

export type Answers = Record<string, string>;

export interface PromptStep {
  id: string;
  question: string;
  /** blank answer allowed; the step then contributes nothing */
  optional?: boolean;
  /** (step id, required answer) pairs; '*' means any non-blank answer */
  dependsOn?: Array<[string, string]>;
  /** error message to print before re-asking, or null when valid */
  validate: (answer: string, answers: Answers) => string | null;
  /** command-line tokens the answer contributes */
  tokens: (answer: string, answers: Answers) => string[];
}

export const SOURCE_TYPES = ['archive', 'dir', 'class', 'source'] as const;
export const FORMATS = ['scarf', 'legacy', 'default'] as const;

export const INPUT_EXTENSIONS: Record<string, string[]> = {
  archive: ['.jar', '.zip'],
  class: ['.class'],
  source: ['.java'],
};

export const FORMAT_EXTENSIONS: Record<string, string> = {
  scarf: '.xml',
  legacy: '.txt',
  default: '.jsonl',
};

export function choice(options: readonly string[]) {
  return (answer: string): string | null =>
    options.includes(answer)
      ? null
      : `"${answer}" is not one of: ${options.join(', ')}`;
}

export function extensionOf(path: string): string {
  const dot = path.lastIndexOf('.');
  return dot < 0 ? '' : path.slice(dot).toLowerCase();
}

export function pathExists(answer: string): string | null {
  return existsSync(answer) ? null : `path does not exist: ${answer}`;
}

function splitPaths(answer: string): string[] {
  return answer.split(/\s+/).filter((p) => p !== '');
}

export const STEPS: PromptStep[] = [
  {
    id: 'in',
    question: `source type (${SOURCE_TYPES.join('/')}): `,
    validate: choice(SOURCE_TYPES),
    tokens: (a) => ['--in', a],
  },
  {
    id: 'paths',
    question: 'input path(s), space separated: ',
    validate: (answer, answers) => {
      const paths = splitPaths(answer);
      if (paths.length === 0) return 'at least one input path is required';
      const expected = INPUT_EXTENSIONS[answers['in']];
      if (!expected) return null; // project directories carry no extension
      for (const p of paths) {
        if (!expected.includes(extensionOf(p))) {
          return `${p} must end with ${expected.join(' or ')} for --in ${answers['in']}`;
        }
      }
      return null;
    },
    tokens: (a) => ['--paths', ...splitPaths(a)],
  },
  {
    id: 'deps',
    question: 'dependency directories, space separated (blank for none): ',
    optional: true,
    validate: () => null,
    tokens: (a) => ['--deps', ...splitPaths(a)],
  },
  {
    id: 'format',
    question: `report format (${FORMATS.join('/')}, blank for default): `,
    optional: true,
    validate: choice(FORMATS),
    tokens: (a) => ['--format', a],
  },
  {
    id: 'out',
    question: 'result file (blank for standard output): ',
    optional: true,
    validate: (answer, answers) => {
      const format = answers['format'] || 'default';
      const expected = FORMAT_EXTENSIONS[format];
      return extensionOf(answer) === expected
        ? null
        : `result file must end with ${expected} for the ${format} format`;
    },
    tokens: (a) => ['--out', a],
  },
  {
    id: 'stream',
    question: 'stream findings as they are found? (y/n): ',
    dependsOn: [['out', '*']],
    validate: choice(['y', 'n']),
    tokens: (a) => (a === 'y' ? ['--stream'] : []),
  },
  {
    id: 'timeout',
    question: 'scan timeout in seconds (blank for 600): ',
    optional: true,
    validate: (answer) =>
      /^\d+(\.\d+)?$/.test(answer) && Number(answer) > 0
        ? null
        : `"${answer}" is not a positive number of seconds`,
    tokens: (a) => ['--timeout', a],
  },
  {
    id: 'fail-on',
    question: 'fail the build at severity (High/Medium/Low, blank for never): ',
    optional: true,
    validate: choice(['High', 'Medium', 'Low']),
    tokens: (a) => ['--fail-on', a],
  },
  {
    id: 'catalog',
    question: 'custom rule catalog file (blank for the shipped one): ',
    optional: true,
    validate: pathExists,
    tokens: (a) => ['--catalog', a],
  },
  {
    id: 'env-override',
    question: 'run even if environment variables are unset? (y/n, blank for n): ',
    optional: true,
    validate: choice(['y', 'n']),
    tokens: (a) => (a === 'y' ? ['--env-override'] : []),
  },
];

export function dependenciesMet(step: PromptStep, answers: Answers): boolean {
  for (const [id, required] of step.dependsOn ?? []) {
    const value = answers[id] ?? '';
    if (required === '*' ? value === '' : value !== required) return false;
  }
  return true;
}

/** Steps must only depend on steps asked earlier (acyclic by order). */
export function checkStepOrder(steps: PromptStep[] = STEPS): void {
  const seen = new Set<string>();
  for (const step of steps) {
    for (const [id] of step.dependsOn ?? []) {
      if (!seen.has(id)) {
        throw new Error(`step "${step.id}" depends on later/unknown step "${id}"`);
      }
    }
    seen.add(step.id);
  }
}

export function shellQuote(token: string): string {
  return /^[A-Za-z0-9@%+=:,./_-]+$/.test(token)
    ? token
    : `'${token.replace(/'/g, `'\\''`)}'`;
}

export interface WalkIO {
  /** resolves null when the user aborts */
  ask(question: string): Promise<string | null>;
  say(line: string): void;
}

/**
 * Walk every applicable step in dependency order, re-asking on
 * validation failure, and return the finished command line (or null
 * on abort).
 */
export async function buildCommand(io: WalkIO,
                                   steps: PromptStep[] = STEPS): Promise<string | null> {
  checkStepOrder(steps);
  const answers: Answers = {};
  for (const step of steps) {
    if (!dependenciesMet(step, answers)) continue;
    for (;;) {
      const raw = await io.ask(step.question);
      if (raw === null) return null;
      const answer = raw.trim();
      if (answer === '') {
        if (step.optional) {
          answers[step.id] = '';
          break;
        }
        io.say('an answer is required');
        continue;
      }
      const problem = step.validate(answer, answers);
      if (problem !== null) {
        io.say(problem);
        continue;
      }
      answers[step.id] = answer;
      break;
    }
  }
  const tokens = ['cryptoscan'];
  for (const step of steps) {
    const answer = answers[step.id];
    if (answer === undefined || answer === '') continue;
    tokens.push(...step.tokens(answer, answers));
  }
  return tokens.map(shellQuote).join(' ');
}
