declare module "mnist" {
  interface DigitBucket {
    length: number;
    get(index: number): number[];
  }
  const mnist: Record<number, DigitBucket> & {
    set(training: number, test: number): {
      training: { input: number[]; output: number[] }[];
      test: { input: number[]; output: number[] }[];
    };
  };
  export default mnist;
}
