// Bulk-upload validation. Row checks mirror the wallet's importer
// reason for reason, so the console shows the same message whether a
// row is rejected locally or server-side.

import Papa from 'papaparse';

export const CSV_HEADER = [
  'counterparty_id',
  'direction',
  'amount_minor',
  'date',
  'details',
] as const;

export interface BulkRow {
  counterpartyId: string;
  direction: 0 | 1;
  amountMinor: number;
  date: string;
  details: string;
}

export interface RowRejection {
  line: number;
  reason: string;
}

export interface BulkReport {
  accepted: BulkRow[];
  rejected: RowRejection[];
}

export class CsvHeaderError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'CsvHeaderError';
  }
}

class RowError extends Error {}

// Python repr() quoting for the strings embedded in reason messages:
// single quotes unless the value itself contains one.
function quoted(text: string): string {
  const escaped = text.replace(/\\/g, '\\\\');
  if (text.includes("'") && !text.includes('"')) {
    return `"${escaped}"`;
  }
  return `'${escaped.replace(/'/g, "\\'")}'`;
}

const DAYS_IN_MONTH = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

function isCalendarDate(text: string): boolean {
  const match = /^(\d{4})-(\d{2})-(\d{2})$/.exec(text);
  if (!match) {
    return false;
  }
  const year = Number(match[1]);
  const month = Number(match[2]);
  const day = Number(match[3]);
  if (month < 1 || month > 12 || day < 1) {
    return false;
  }
  const leap = (year % 4 === 0 && year % 100 !== 0) || year % 400 === 0;
  const limit = month === 2 && leap ? 29 : DAYS_IN_MONTH[month - 1];
  return day <= limit;
}

function parseRow(row: string[]): BulkRow {
  if (row.length !== CSV_HEADER.length) {
    throw new RowError(`expected ${CSV_HEADER.length} fields, got ${row.length}`);
  }
  const [counterpartyId, rawDirection, rawAmount, rawDate, details] = row;
  if (!counterpartyId) {
    throw new RowError('empty counterparty_id');
  }
  if (rawDirection !== '0' && rawDirection !== '1') {
    throw new RowError(`direction must be 0 or 1, got ${quoted(rawDirection)}`);
  }
  const trimmed = rawAmount.trim();
  if (!/^[+-]?\d+$/.test(trimmed)) {
    throw new RowError(`amount_minor is not an integer: ${quoted(rawAmount)}`);
  }
  const amount = Number(trimmed);
  if (amount < 0) {
    throw new RowError(`amount_minor is negative: ${amount}`);
  }
  if (!isCalendarDate(rawDate)) {
    throw new RowError(`invalid date: ${quoted(rawDate)}`);
  }
  return {
    counterpartyId,
    direction: rawDirection === '0' ? 0 : 1,
    amountMinor: amount,
    date: rawDate,
    details,
  };
}

function isEmptyRow(row: string[]): boolean {
  return row.length === 0 || (row.length === 1 && row[0] === '');
}

export function validateBulkCsv(text: string): BulkReport {
  const parsed = Papa.parse<string[]>(text, { delimiter: ',' });
  const rows = parsed.data;
  const header = rows[0];
  if (
    !header ||
    header.length !== CSV_HEADER.length ||
    header.some((name, i) => name !== CSV_HEADER[i])
  ) {
    throw new CsvHeaderError(`line 1: header must be ${quoted(CSV_HEADER.join(','))}`);
  }
  const accepted: BulkRow[] = [];
  const rejected: RowRejection[] = [];
  for (let i = 1; i < rows.length; i++) {
    const row = rows[i];
    if (isEmptyRow(row)) {
      continue;
    }
    try {
      accepted.push(parseRow(row));
    } catch (error) {
      if (error instanceof RowError) {
        rejected.push({ line: i + 1, reason: error.message });
        continue;
      }
      throw error;
    }
  }
  return { accepted, rejected };
}
