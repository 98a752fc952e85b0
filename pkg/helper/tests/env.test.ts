/**
 * Environment-assistance tests: output must mirror the scanner's own
 * variable table and be directly sourceable.
 */

import { spawnSync } from 'child_process';
import { mkdtempSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';
import { describe, expect, it } from 'vitest';
import { REQUIRED_VARS, envAssist } from '../src/env';

const ALL_SET = {
  JAVA_HOME: '/usr/lib/jvm/default',
  JAVA_VERSION: '1.8',
  CRYPTOSCAN_HOME: '/opt/cryptoscan',
};

describe('envAssist', () => {
  it('reports three ok lines when everything is set', () => {
    const lines = envAssist(ALL_SET as NodeJS.ProcessEnv);
    expect(lines).toHaveLength(3);
    for (const line of lines) {
      expect(line.startsWith('# ok: ')).toBe(true);
    }
  });

  it('prints an export instruction for each unset variable', () => {
    const lines = envAssist({ JAVA_HOME: '/jvm' } as NodeJS.ProcessEnv);
    expect(lines[0]).toBe('# ok: JAVA_HOME=/jvm');
    expect(lines[1]).toBe('export JAVA_VERSION="1.8"');
    expect(lines[2]).toBe('export CRYPTOSCAN_HOME="/opt/cryptoscan"');
  });

  it('treats empty values as unset', () => {
    const lines = envAssist({ JAVA_HOME: '  ' } as NodeJS.ProcessEnv);
    expect(lines[0].startsWith('export JAVA_HOME=')).toBe(true);
  });

  it('names match the scanner environment table', () => {
    const py = `
from cryptoscan.cli import ENV_REQUIREMENTS
print("\\n".join(name for name, _d, _e in ENV_REQUIREMENTS))
`;
    const result = spawnSync('python3', ['-c', py], { encoding: 'utf-8' });
    expect(result.status).toBe(0);
    const coreNames = result.stdout.trim().split('\n');
    expect(REQUIRED_VARS.map((v) => v.name)).toEqual(coreNames);
  });

  it('sourcing the output in a clean subshell satisfies the scanner env check', () => {
    const lines = envAssist({} as NodeJS.ProcessEnv);
    const dir = mkdtempSync(join(tmpdir(), 'envassist-'));
    const script = join(dir, 'setenv.sh');
    writeFileSync(script, lines.join('\n') + '\n');
    const result = spawnSync(
      'bash',
      ['-c',
       `unset JAVA_HOME JAVA_VERSION CRYPTOSCAN_HOME; . ${script}; ` +
       'python3 -m cryptoscan --check-env'],
      { encoding: 'utf-8', timeout: 30_000 },
    );
    expect(result.status, result.stdout + result.stderr).toBe(0);
    expect(result.stdout).toContain('ok: JAVA_HOME=');
  });

  it('without sourcing, the same clean subshell fails the env check', () => {
    const result = spawnSync(
      'bash',
      ['-c',
       'unset JAVA_HOME JAVA_VERSION CRYPTOSCAN_HOME; ' +
       'python3 -m cryptoscan --check-env'],
      { encoding: 'utf-8', timeout: 30_000 },
    );
    expect(result.status).toBe(3); // environment exit code of the scanner
  });
});
