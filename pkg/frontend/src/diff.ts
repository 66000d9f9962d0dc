/** Word-level diff used to visualize narrative regeneration.
 *
 * Classic LCS over whitespace-separated words; whitespace is attached to the
 * preceding word so joining the tokens reproduces either input exactly.
 */

export type DiffOp = 'same' | 'added' | 'removed';

export interface DiffToken {
  text: string;
  op: DiffOp;
}

function splitWords(text: string): string[] {
  if (text === '') return [];
  return text.match(/\S+\s*|\s+/g) ?? [];
}

export function diffWords(previous: string, current: string): DiffToken[] {
  const a = splitWords(previous);
  const b = splitWords(current);
  const n = a.length;
  const m = b.length;

  // LCS length table.
  const table: number[][] = Array.from({ length: n + 1 }, () =>
    new Array<number>(m + 1).fill(0),
  );
  for (let i = n - 1; i >= 0; i--) {
    for (let j = m - 1; j >= 0; j--) {
      table[i][j] =
        a[i].trim() === b[j].trim()
          ? table[i + 1][j + 1] + 1
          : Math.max(table[i + 1][j], table[i][j + 1]);
    }
  }

  const tokens: DiffToken[] = [];
  let i = 0;
  let j = 0;
  while (i < n && j < m) {
    if (a[i].trim() === b[j].trim()) {
      tokens.push({ text: b[j], op: 'same' });
      i++;
      j++;
    } else if (table[i + 1][j] >= table[i][j + 1]) {
      tokens.push({ text: a[i], op: 'removed' });
      i++;
    } else {
      tokens.push({ text: b[j], op: 'added' });
      j++;
    }
  }
  while (i < n) tokens.push({ text: a[i++], op: 'removed' });
  while (j < m) tokens.push({ text: b[j++], op: 'added' });
  return tokens;
}

/** Joined added+same tokens reproduce the current text (modulo whitespace
 * carried by removed words); handy for tests and copy actions. */
export function currentText(tokens: DiffToken[]): string {
  return tokens
    .filter((t) => t.op !== 'removed')
    .map((t) => t.text)
    .join('')
    .trimEnd();
}

export function removedText(tokens: DiffToken[]): string {
  return tokens
    .filter((t) => t.op !== 'added')
    .map((t) => t.text)
    .join('')
    .trimEnd();
}

export function changedCount(tokens: DiffToken[]): number {
  return tokens.filter((t) => t.op !== 'same').length;
}
