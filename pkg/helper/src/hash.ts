/**
 * Executable hashing: SHA-256 of the file bytes, lowercase hex.
 */

import { createHash } from 'crypto';
import { readFileSync } from 'fs';

export class FileMissing extends Error {}

export function hashExecutable(path: string): string {
  let data: Buffer;
  try {
    data = readFileSync(path);
  } catch (err: any) {
    if (err && err.code === 'ENOENT') {
      throw new FileMissing(`no such file: ${path}`);
    }
    throw err;
  }
  return createHash('sha256').update(data).digest('hex');
}
