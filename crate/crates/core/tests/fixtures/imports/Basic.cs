using System;
using System.Collections.Generic;
using Forms = System.Windows.Forms;
using static System.Math;

namespace PowerToys.Demo
{
    public class Basic
    {
        public double Root(double x) => Sqrt(x);
    }
}
