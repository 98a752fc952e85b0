/**
 * Environment assistance: the scanner refuses to run unless three
 * variables are set; print their state with ready-to-source fixes.
 */

export interface RequiredVar {
  name: string;
  description: string;
  example: string;
}

// Must stay in step with the core CLI's environment table.
export const REQUIRED_VARS: RequiredVar[] = [
  { name: 'JAVA_HOME', description: 'home directory of the Java toolchain', example: '/usr/lib/jvm/default' },
  { name: 'JAVA_VERSION', description: 'Java runtime version identifier', example: '1.8' },
  { name: 'CRYPTOSCAN_HOME', description: 'cryptoscan home directory', example: '/opt/cryptoscan' },
];

/**
 * One line per required variable: a comment for variables already set,
 * an `export` instruction for the rest. Every line is valid shell, so
 * the whole output can be sourced as-is.
 */
export function envAssist(env: NodeJS.ProcessEnv = process.env): string[] {
  return REQUIRED_VARS.map((v) => {
    const value = env[v.name];
    if (value && value.trim() !== '') {
      return `# ok: ${v.name}=${value}`;
    }
    return `export ${v.name}="${v.example}"`;
  });
}
